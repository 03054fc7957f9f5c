#pragma once

// Brute-force reference implementations the unit and acceptance tests compare
// the pipeline against. Deliberately written in the dumbest possible way.

#include <Eigen/Dense>

namespace oracles {

// Cyclic cross-correlation over the router ports: port q reads
//   y(q) = sum_d w(d) * X((q + shift + d) mod N)
// where X is the per-absolute-port drive vector (zero on undriven ports).
inline Eigen::ArrayXd cyclic_xcorr(const Eigen::ArrayXd& port_drive, const Eigen::ArrayXd& w,
                                   int shift) {
    const int n = static_cast<int>(port_drive.size());
    const int k = static_cast<int>(w.size());
    Eigen::ArrayXd y = Eigen::ArrayXd::Zero(n);
    for (int q = 0; q < n; ++q)
        for (int d = 0; d < k; ++d) {
            const int p = ((q + shift + d) % n + n) % n;
            y[q] += w[d] * port_drive[p];
        }
    return y;
}

// Linear valid cross-correlation: y(j) = sum_d w(d) * x(j + d), j = 0..len-k.
inline Eigen::ArrayXd linear_xcorr_valid(const Eigen::ArrayXd& x, const Eigen::ArrayXd& w) {
    const int len = static_cast<int>(x.size());
    const int k = static_cast<int>(w.size());
    Eigen::ArrayXd y = Eigen::ArrayXd::Zero(len - k + 1);
    for (int j = 0; j + k <= len; ++j)
        for (int d = 0; d < k; ++d) y[j] += w[d] * x[j + d];
    return y;
}

// Valid-region 2-D cross-correlation (no kernel flip).
inline Eigen::MatrixXd xcorr2d_valid(const Eigen::MatrixXd& image, const Eigen::MatrixXd& kernel) {
    const auto h = image.rows() - kernel.rows() + 1;
    const auto w = image.cols() - kernel.cols() + 1;
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(h, w);
    for (Eigen::Index i = 0; i < h; ++i)
        for (Eigen::Index j = 0; j < w; ++j)
            for (Eigen::Index r = 0; r < kernel.rows(); ++r)
                for (Eigen::Index c = 0; c < kernel.cols(); ++c)
                    out(i, j) += image(i + r, j + c) * kernel(r, c);
    return out;
}

inline double rms(const Eigen::ArrayXd& v) {
    return std::sqrt(v.square().sum() / static_cast<double>(v.size()));
}

} // namespace oracles
