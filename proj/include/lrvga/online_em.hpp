#pragma once

// Stochastic-approximation EM for factor analysis, kept in O(d p) memory by
// tracking only the diagonal of the d x d sufficient statistic. Used as the
// streaming baseline for the recursive EM.

#include "lrvga/fa_precision.hpp"

namespace lrvga {

struct OnlineEmState {
  VectorXd s1_diag;  // diag of E[v v^T]
  MatrixXd s2;       // p x d, E[z v^T]
  MatrixXd s3;       // p x p, E[z z^T]
  long step_index = 0;
  MatrixXd averaged_loadings;
  VectorXd averaged_diagonal;
  long averaged_count = 0;

  static OnlineEmState zeros(Index d, Index p);
};

// gamma_t = t^{-0.6} (gamma = 1 at t <= 1).
double online_em_step_size(long t);

struct OnlineEmResult {
  OnlineEmState state;
  FaPrecision fa;
  Index clamped_entries = 0;
};

// One E-step on sample v with step gamma, then the M-step
// W = S2^T S3^{-1}, psi = diag(S1) - diag(W S2).
OnlineEmResult online_em_update(const OnlineEmState& state, const FaPrecision& fa,
                                const VectorXd& v, double gamma);

// Running mean of the iterates over t > N/2 (t~ = t - floor(N/2)). Folds `fa`
// into the state's accumulators and returns the current average.
FaPrecision polyak_ruppert_average(OnlineEmState& state, const FaPrecision& fa, long t, long n);

}  // namespace lrvga
