#include "lrvga/online_em.hpp"

#include <cmath>

#include "lrvga/errors.hpp"

namespace lrvga {

OnlineEmState OnlineEmState::zeros(Index d, Index p) {
  OnlineEmState s;
  s.s1_diag = VectorXd::Zero(d);
  s.s2 = MatrixXd::Zero(p, d);
  s.s3 = MatrixXd::Zero(p, p);
  return s;
}

double online_em_step_size(long t) {
  if (t <= 1) return 1.0;
  return std::pow(static_cast<double>(t), -0.6);
}

OnlineEmResult online_em_update(const OnlineEmState& state, const FaPrecision& fa,
                                const VectorXd& v, double gamma) {
  if (!(gamma > 0.0 && gamma <= 1.0)) throw std::invalid_argument("online_em_update: gamma must lie in (0, 1]");
  if (v.size() != fa.dim() || state.s1_diag.size() != fa.dim() || state.s2.rows() != fa.rank()) {
    throw DimensionError("online_em_update: state, factors and sample disagree in shape");
  }
  const LatentGram gram(fa);
  const VectorXd z = gram.solver().solve(VectorXd(gram.scaled_loadings().transpose() * v));

  OnlineEmResult out{state, fa, 0};
  OnlineEmState& s = out.state;
  const double keep = 1.0 - gamma;
  s.s1_diag = keep * s.s1_diag + gamma * v.cwiseProduct(v);
  s.s2 = keep * s.s2 + gamma * z * v.transpose();
  s.s3 = keep * s.s3 + gamma * (gram.solver().inverse() + z * z.transpose());
  s.s3 = 0.5 * (s.s3 + s.s3.transpose());
  s.step_index += 1;

  Eigen::LLT<MatrixXd> llt(s.s3);
  if (llt.info() != Eigen::Success) throw NumericalError("online_em_update: S3 is singular");
  MatrixXd loadings = llt.solve(s.s2).transpose();  // S2^T S3^{-1}
  VectorXd diagonal = s.s1_diag - star(loadings, s.s2.transpose());
  if (!loadings.allFinite() || !diagonal.allFinite()) {
    throw NumericalError("online EM produced non-finite factors");
  }
  for (Index i = 0; i < diagonal.size(); ++i) {
    if (diagonal(i) < kPsiFloor) {
      diagonal(i) = kPsiFloor;
      ++out.clamped_entries;
    }
  }
  out.fa = FaPrecision(std::move(loadings), std::move(diagonal));
  return out;
}

FaPrecision polyak_ruppert_average(OnlineEmState& state, const FaPrecision& fa, long t, long n) {
  const long half = n / 2;
  if (2 * t <= n) {
    throw std::invalid_argument("polyak_ruppert_average: averaging starts after t > N/2");
  }
  const long tilde = t - half;
  if (state.averaged_count == 0 || tilde == 1) {
    state.averaged_loadings = fa.loadings();
    state.averaged_diagonal = fa.diagonal();
  } else {
    const double w_old = static_cast<double>(tilde - 1) / static_cast<double>(tilde);
    const double w_new = 1.0 / static_cast<double>(tilde);
    state.averaged_loadings = w_old * state.averaged_loadings + w_new * fa.loadings();
    state.averaged_diagonal = w_old * state.averaged_diagonal + w_new * fa.diagonal();
  }
  state.averaged_count = tilde;
  return FaPrecision(state.averaged_loadings, state.averaged_diagonal);
}

}  // namespace lrvga
