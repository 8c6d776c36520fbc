#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace mmcr {

/// Dense row-major matrix of doubles.
///
/// Construction from raw data rejects non-finite entries; element access
/// afterwards is unchecked so kernels can write freely.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
    Matrix(std::initializer_list<std::initializer_list<double>> rows);

    static Matrix identity(std::size_t n);
    static Matrix diagonal(std::span<const double> values);
    static Matrix column(std::span<const double> values);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const noexcept { return {data_.data() + r * cols_, cols_}; }
    std::vector<double> col(std::size_t c) const;
    void set_col(std::size_t c, std::span<const double> values);

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }

    Matrix transpose() const;
    Matrix block(std::size_t r0, std::size_t c0, std::size_t nr, std::size_t nc) const;
    /// Columns [0, n) only.
    Matrix left_cols(std::size_t n) const { return block(0, 0, rows_, n); }

    Matrix& operator+=(const Matrix& o);
    Matrix& operator-=(const Matrix& o);
    Matrix& operator*=(double s);

    bool all_finite() const noexcept;
    bool same_shape(const Matrix& o) const noexcept { return rows_ == o.rows_ && cols_ == o.cols_; }

    friend bool operator==(const Matrix& a, const Matrix& b) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

Matrix operator+(Matrix a, const Matrix& b);
Matrix operator-(Matrix a, const Matrix& b);
Matrix operator*(Matrix a, double s);
Matrix operator*(double s, Matrix a);

double frobenius_norm(const Matrix& a);
double max_abs_diff(const Matrix& a, const Matrix& b);
double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);

// Matrix serialization. CSV: header line "rows,cols" then one row per line.
// Binary: u64 rows, u64 cols, then rows*cols f64, all little-endian.
void write_csv(std::ostream& os, const Matrix& m);
Matrix read_csv(std::istream& is);
void write_binary(std::ostream& os, const Matrix& m);
Matrix read_binary(std::istream& is);

namespace io {
void put_u64(std::ostream& os, std::uint64_t v);
void put_f64(std::ostream& os, double v);
std::uint64_t get_u64(std::istream& is);
double get_f64(std::istream& is);
}  // namespace io

}  // namespace mmcr
