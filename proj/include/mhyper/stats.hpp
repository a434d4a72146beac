#pragma once

#include <Eigen/Dense>
#include <vector>

namespace mhyper {

template <typename S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename S>
using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;

using MatF = Mat<float>;

// Per-dimension population mean and variance over the selected rows.
// rows == nullptr selects every row.
template <typename S>
void column_stats(const Mat<S>& data, const std::vector<int>* rows,
                  Vec<S>& mean, Vec<S>& var) {
    const Eigen::Index cols = data.cols();
    mean = Vec<S>::Zero(cols);
    var = Vec<S>::Zero(cols);
    const Eigen::Index n = rows ? static_cast<Eigen::Index>(rows->size()) : data.rows();
    if (n == 0) return;
    if (rows) {
        for (int r : *rows) mean += data.row(r).transpose();
    } else {
        for (Eigen::Index r = 0; r < data.rows(); ++r) mean += data.row(r).transpose();
    }
    mean /= static_cast<S>(n);
    auto accum = [&](Eigen::Index r) {
        Vec<S> diff = data.row(r).transpose() - mean;
        var += diff.cwiseProduct(diff);
    };
    if (rows) {
        for (int r : *rows) accum(r);
    } else {
        for (Eigen::Index r = 0; r < data.rows(); ++r) accum(r);
    }
    var /= static_cast<S>(n);
}

} // namespace mhyper
