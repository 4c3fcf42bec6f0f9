#pragma once

namespace pks::constants {

// Sharp HLS constant for p = q = 4/3 in two dimensions.
double c_hls();
// Norms of the standard Gaussian density gamma(x) = exp(-|x|^2/2)/(2 pi).
double gamma_norm_43();
double gamma_norm_2();
double x_gamma_norm_43();  // || |x| gamma ||_{4/3}
// prod_{m >= 1} (1 - 2^{-m}/4)
double big_lambda();
// (1/5) e^{-1/5}
double eta_star();
// 8 pi (log 8 - 1)
double critical_free_energy();
double log_hls_constant(double M);
double kappa(double M, double lambda);

}  // namespace pks::constants
