#pragma once

// Small dense vectors and matrices for state dimensions m <= 16.

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace omv {

using Vector = std::vector<double>;

[[nodiscard]] double dot(std::span<const double> a, std::span<const double> b);
[[nodiscard]] double norm(std::span<const double> a);
[[nodiscard]] double norm_squared(std::span<const double> a);
[[nodiscard]] double distance(std::span<const double> a, std::span<const double> b);
[[nodiscard]] Vector subtract(std::span<const double> a, std::span<const double> b);
[[nodiscard]] Vector add(std::span<const double> a, std::span<const double> b);
[[nodiscard]] Vector scaled(std::span<const double> a, double s);
/// y += s * x
void axpy(double s, std::span<const double> x, std::span<double> y);

/// Row-major dense matrix.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
    Matrix(std::size_t rows, std::size_t cols, std::initializer_list<double> row_major);

    [[nodiscard]] static Matrix identity(std::size_t n);
    [[nodiscard]] static Matrix diagonal(std::span<const double> diag);

    [[nodiscard]] std::size_t rows() const noexcept { return rows_; }
    [[nodiscard]] std::size_t cols() const noexcept { return cols_; }
    [[nodiscard]] bool is_square() const noexcept { return rows_ == cols_; }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    [[nodiscard]] std::span<double> data() noexcept { return data_; }
    [[nodiscard]] std::span<const double> data() const noexcept { return data_; }

    [[nodiscard]] Matrix transpose() const;
    [[nodiscard]] double frobenius() const;
    /// Frobenius norm of (A - A^T).
    [[nodiscard]] double asymmetry() const;

    friend Matrix operator*(const Matrix& a, const Matrix& b);
    friend Matrix operator+(const Matrix& a, const Matrix& b);
    friend Matrix operator-(const Matrix& a, const Matrix& b);
    friend Matrix operator*(double s, const Matrix& a);

    bool operator==(const Matrix&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

[[nodiscard]] Vector multiply(const Matrix& a, std::span<const double> x);
/// out = A x, no allocation; out.size() == a.rows().
void multiply_into(std::span<const double> a_row_major, std::size_t rows, std::size_t cols,
                   std::span<const double> x, std::span<double> out);

/// Eigen-decomposition A = Q diag(values) Q^T of a symmetric matrix.
struct SymmetricEigen {
    Vector values;   // ascending
    Matrix vectors;  // columns are eigenvectors
};

/// Cyclic Jacobi with a fixed sweep order, deterministic for a given input.
/// Only the upper triangle is read.
[[nodiscard]] SymmetricEigen jacobi_eigen(const Matrix& a, double tol = 1e-15,
                                          int max_sweeps = 100);

/// Q diag(fn(values)) Q^T
template <typename Fn>
[[nodiscard]] Matrix spectral_apply(const SymmetricEigen& eig, Fn fn) {
    const std::size_t n = eig.values.size();
    Matrix out(n, n);
    for (std::size_t k = 0; k < n; ++k) {
        const double w = fn(eig.values[k]);
        for (std::size_t i = 0; i < n; ++i) {
            const double qi = eig.vectors(i, k) * w;
            for (std::size_t j = 0; j < n; ++j) out(i, j) += qi * eig.vectors(j, k);
        }
    }
    return out;
}

/// Solves A x = b by Gaussian elimination with partial pivoting. Throws
/// SpectralError when A is numerically singular.
[[nodiscard]] Vector solve(Matrix a, Vector b);

}  // namespace omv
