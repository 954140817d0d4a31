#include "covsteer/chance.hpp"

#include <cmath>
#include <stdexcept>

#include "covsteer/environment.hpp"

namespace covsteer {

double standard_normal_cdf(double z) { return 0.5 * std::erfc(-z * M_SQRT1_2); }

double standard_normal_tail(double z) { return 0.5 * std::erfc(z * M_SQRT1_2); }

namespace {

double standard_normal_pdf(double z) {
    return std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI);
}

// Wichura's PPND16 (algorithm AS241), good to ~1e-16 relative on its own.
double ppnd16(double p) {
    const double q = p - 0.5;
    if (std::abs(q) <= 0.425) {
        const double r = 0.180625 - q * q;
        return q *
               (((((((2.5090809287301226727e+3 * r + 3.3430575583588128105e+4) * r +
                     6.7265770927008700853e+4) *
                        r +
                    4.5921953931549871457e+4) *
                       r +
                   1.3731693765509461125e+4) *
                      r +
                  1.9715909503065514427e+3) *
                     r +
                 1.3314166789178437745e+2) *
                    r +
                3.3871328727963666080e+0) /
               (((((((5.2264952788528545610e+3 * r + 2.8729085735721942674e+4) * r +
                     3.9307895800092710610e+4) *
                        r +
                    2.1213794301586595867e+4) *
                       r +
                   5.3941960214247511077e+3) *
                      r +
                  6.8718700749205790830e+2) *
                     r +
                 4.2313330701600911252e+1) *
                    r +
                1.0);
    }
    double r = (q < 0.0) ? p : 1.0 - p;
    r = std::sqrt(-std::log(r));
    double z;
    if (r <= 5.0) {
        r -= 1.6;
        z = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                  2.41780725177450611770e-1) *
                     r +
                 1.27045825245236838258e+0) *
                    r +
                3.64784832476320460504e+0) *
                   r +
               5.76949722146069140550e+0) *
                  r +
              4.63033784615654529590e+0) *
                 r +
             1.42343711074968357734e+0) /
            (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                  1.51986665636164571966e-2) *
                     r +
                 1.48103976427480074590e-1) *
                    r +
                6.89767334985100004550e-1) *
                   r +
               1.67638483018380384940e+0) *
                  r +
              2.05319162663775882187e+0) *
                 r +
             1.0);
    } else {
        r -= 5.0;
        z = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                  1.24266094738807843860e-3) *
                     r +
                 2.65321895265761230930e-2) *
                    r +
                2.96560571828504891230e-1) *
                   r +
               1.78482653991729133580e+0) *
                  r +
              5.46378491116411436990e+0) *
                 r +
             6.65790464350110377720e+0) /
            (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                  1.84631831751005468180e-5) *
                     r +
                 7.86869131145613259100e-4) *
                    r +
                1.48753612908506148525e-2) *
                   r +
               1.36929880922735805310e-1) *
                  r +
              5.99832206555887937690e-1) *
                 r +
             1.0);
    }
    return (q < 0.0) ? -z : z;
}

}  // namespace

double inverse_standard_normal_cdf(double p) {
    if (!(p > 0.0 && p < 1.0))
        throw std::invalid_argument("inverse_standard_normal_cdf: p must lie in (0, 1)");
    // Fold into the lower tail where Phi is computed with full relative
    // accuracy, then apply one Newton step on Phi(z) = p.
    const bool flip = p > 0.5;
    const double pl = flip ? 1.0 - p : p;
    double z = ppnd16(pl);
    const double f = standard_normal_cdf(z) - pl;
    const double d = standard_normal_pdf(z);
    if (d > 0.0) z -= f / d;
    return flip ? -z : z;
}

MatrixXd psd_sqrt(const MatrixXd& S) {
    if (S.rows() != S.cols()) throw std::invalid_argument("psd_sqrt: matrix not square");
    const MatrixXd sym = 0.5 * (S + S.transpose());
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(sym);
    if (eig.info() != Eigen::Success)
        throw std::runtime_error("psd_sqrt: eigendecomposition failed");
    VectorXd lam = eig.eigenvalues();
    const double scale = std::max(1.0, lam.cwiseAbs().maxCoeff());
    for (int i = 0; i < lam.size(); ++i) {
        if (lam[i] < -1e-9 * scale)
            throw std::invalid_argument("psd_sqrt: matrix is not positive semidefinite");
        lam[i] = std::sqrt(std::max(lam[i], 0.0));
    }
    return eig.eigenvectors() * lam.asDiagonal() * eig.eigenvectors().transpose();
}

VectorXd DeterministicHalfspaceConstraint::norm_argument(
    const MatrixXd& sqrtS, const std::vector<MatrixXd>& K) const {
    const int n_x = static_cast<int>(K.empty() ? 0 : K[0].cols());
    VectorXd v = VectorXd::Zero(sqrtS.rows());
    for (size_t j = 0; j < K.size(); ++j) {
        const int n_u = static_cast<int>(K[j].rows());
        v.segment(static_cast<int>(j) * n_x, n_x) +=
            K[j].transpose() * feedback_seed.segment(static_cast<int>(j) * n_u, n_u);
    }
    return norm_const + sqrtS * v;
}

double DeterministicHalfspaceConstraint::evaluate(const MatrixXd& sqrtS,
                                                  const VectorXd& V,
                                                  const std::vector<MatrixXd>& K) const {
    const double mean = mean_offset + mean_coeff_v.dot(V);
    return mean + quantile * norm_argument(sqrtS, K).norm() - beta;
}

DeterministicHalfspaceConstraint build_halfspace_constraint(const BlockOperators& ops,
                                                            const MatrixXd& sqrtS,
                                                            const VectorXd& mu0,
                                                            const Halfspace& face, int k,
                                                            double p) {
    if (!(p > 0.0 && p < 0.5))
        throw std::invalid_argument("chance constraint risk must lie in (0, 0.5)");
    if (k < 0 || k > ops.horizon)
        throw std::invalid_argument("chance constraint step index out of range");
    if (face.alpha.size() != ops.n_x)
        throw std::invalid_argument("halfspace normal dimension mismatch");
    DeterministicHalfspaceConstraint c;
    c.k = k;
    c.beta = face.beta;
    c.quantile = inverse_standard_normal_cdf(1.0 - p);
    // E_k' alpha is alpha placed in stacked block k.
    VectorXd ek_alpha = VectorXd::Zero(ops.stacked_dim());
    ek_alpha.segment(k * ops.n_x, ops.n_x) = face.alpha;
    c.mean_coeff_v = ops.calB.transpose() * ek_alpha;
    c.mean_offset = face.alpha.dot(ops.calA.middleRows(k * ops.n_x, ops.n_x) * mu0);
    c.norm_const = sqrtS * ek_alpha;
    c.feedback_seed = c.mean_coeff_v;  // calB' E_k' alpha
    return c;
}

}  // namespace covsteer
