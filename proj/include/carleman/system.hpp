#pragma once

// Weighted linear least-squares systems over a grid of unknowns, with some
// unknowns eliminated by boundary conditions.

#include <cmath>
#include <cstddef>
#include <vector>

#include <Eigen/Sparse>

#include "carleman/error.hpp"
#include "carleman/model.hpp"

namespace carleman {

using SparseRowMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using SparseColMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor>;
using Eigen::VectorXd;

/// Affine parametrization q = P z + offset of the full unknown vector q by
/// the free unknowns z. A node is free, fixed to a value, or tied to
/// (equal to) another node that is itself free or fixed.
class DofMap {
public:
    DofMap() = default;
    explicit DofMap(std::size_t n) : kind_(n, Kind::Free), value_(n, 0.0), target_(n, 0) {}

    void fix(std::size_t node, double value) {
        kind_[node] = Kind::Fixed;
        value_[node] = value;
    }
    void tie(std::size_t node, std::size_t target) {
        kind_[node] = Kind::Tied;
        target_[node] = target;
    }

    bool is_free(std::size_t node) const { return kind_[node] == Kind::Free; }
    bool is_fixed(std::size_t node) const { return kind_[node] == Kind::Fixed; }
    bool is_tied(std::size_t node) const { return kind_[node] == Kind::Tied; }
    double fixed_value(std::size_t node) const { return value_[node]; }
    std::size_t full_size() const { return kind_.size(); }
    std::size_t free_size() const { return free_nodes_.size(); }
    const std::vector<std::size_t>& free_nodes() const { return free_nodes_; }

    /// Builds P and the offset. Call after all fix/tie calls.
    void finalize() {
        const std::size_t n = kind_.size();
        free_index_.assign(n, -1);
        free_nodes_.clear();
        for (std::size_t k = 0; k < n; ++k)
            if (kind_[k] == Kind::Free) {
                free_index_[k] = static_cast<long>(free_nodes_.size());
                free_nodes_.push_back(k);
            }
        detail::require(!free_nodes_.empty(), "dof map: no free unknowns");

        offset_ = VectorXd::Zero(static_cast<Eigen::Index>(n));
        std::vector<Eigen::Triplet<double>> trip;
        trip.reserve(n);
        for (std::size_t k = 0; k < n; ++k) {
            const auto row = static_cast<Eigen::Index>(k);
            switch (kind_[k]) {
                case Kind::Free:
                    trip.emplace_back(row, free_index_[k], 1.0);
                    break;
                case Kind::Fixed:
                    offset_(row) = value_[k];
                    break;
                case Kind::Tied: {
                    const std::size_t t = target_[k];
                    detail::require(kind_[t] != Kind::Tied, "dof map: chained ties are not supported");
                    if (kind_[t] == Kind::Free)
                        trip.emplace_back(row, free_index_[t], 1.0);
                    else
                        offset_(row) = value_[t];
                    break;
                }
            }
        }
        P_.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(free_nodes_.size()));
        P_.setFromTriplets(trip.begin(), trip.end());
    }

    const SparseColMatrix& prolongation() const { return P_; }
    const VectorXd& offset() const { return offset_; }

    VectorXd expand(const VectorXd& z) const { return P_ * z + offset_; }

    /// Free-unknown values of a full vector.
    VectorXd restrict(const VectorXd& q) const {
        VectorXd z(static_cast<Eigen::Index>(free_nodes_.size()));
        for (std::size_t f = 0; f < free_nodes_.size(); ++f)
            z(static_cast<Eigen::Index>(f)) = q(static_cast<Eigen::Index>(free_nodes_[f]));
        return z;
    }

    /// True when q honours every fixed value and tie to within tol.
    bool feasible(const VectorXd& q, double tol = 1e-12) const {
        for (std::size_t k = 0; k < kind_.size(); ++k) {
            const double v = q(static_cast<Eigen::Index>(k));
            if (kind_[k] == Kind::Fixed && std::abs(v - value_[k]) > tol) return false;
            if (kind_[k] == Kind::Tied && std::abs(v - q(static_cast<Eigen::Index>(target_[k]))) > tol) return false;
        }
        return true;
    }

private:
    enum class Kind : unsigned char { Free, Fixed, Tied };
    std::vector<Kind> kind_;
    std::vector<double> value_;
    std::vector<std::size_t> target_;
    std::vector<long> free_index_;
    std::vector<std::size_t> free_nodes_;
    SparseColMatrix P_;
    VectorXd offset_;
};

/// Objective  sum_r (w_r (rows q - rhs)_r)^2  over feasible q.
///
/// Rows [0, pde_rows) are PDE residual rows; the remaining rows are the
/// regularization rows, weighted by sqrt(beta), whose unweighted sum of
/// squares is the discrete H2 norm used by the projection ball.
struct QuadraticSystem {
    InversionGrid grid;
    SparseRowMatrix rows;
    VectorXd rhs;
    VectorXd weights;
    Eigen::Index pde_rows = 0;
    double beta = 0.0;
    double cell = 1.0;  // dx * dt
    DofMap dofs;

    /// Caches the weighted reduced operator. Call after any change to
    /// rows, rhs, weights or dofs.
    void finalize() {
        detail::require(rows.rows() == rhs.size() && rows.rows() == weights.size(),
                        "quadratic system: rows, rhs and weights disagree in length");
        detail::require(static_cast<std::size_t>(rows.cols()) == dofs.full_size(),
                        "quadratic system: column count differs from the dof map");
        const SparseRowMatrix weighted = weights.asDiagonal() * rows;
        reduced_ = SparseColMatrix(weighted * dofs.prolongation());
        reduced_rhs_ = weights.cwiseProduct(rhs - rows * dofs.offset());
    }

    Eigen::Index free_size() const { return reduced_.cols(); }

    /// Weighted design matrix acting on the free unknowns.
    const SparseColMatrix& reduced_matrix() const { return reduced_; }
    /// Objective(z) = || reduced_matrix z - reduced_rhs ||^2.
    const VectorXd& reduced_rhs() const { return reduced_rhs_; }

    /// Weighted residual of a full vector.
    VectorXd residual(const VectorXd& q) const { return weights.cwiseProduct(rows * q - rhs); }

    double objective_full(const VectorXd& q) const { return residual(q).squaredNorm(); }
    double objective(const VectorXd& z) const { return (reduced_ * z - reduced_rhs_).squaredNorm(); }
    VectorXd gradient(const VectorXd& z) const { return 2.0 * (reduced_.transpose() * (reduced_ * z - reduced_rhs_)); }

    /// Discrete H2 norm of a full vector, from the regularization rows.
    double h2_norm(const VectorXd& q) const {
        const Eigen::Index n_reg = rows.rows() - pde_rows;
        if (n_reg == 0) return q.norm();
        const VectorXd r = rows.bottomRows(n_reg) * q;
        return r.norm();
    }

private:
    SparseColMatrix reduced_;
    VectorXd reduced_rhs_;
};

}  // namespace carleman
