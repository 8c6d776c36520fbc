#include "mmcr/matrix.hpp"

#include "mmcr/error.hpp"

#include <bit>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

namespace mmcr {

namespace {

void require_finite(std::span<const double> values)
{
    for (double v : values)
        if (!std::isfinite(v))
            throw ContractViolation("matrix entries must be finite");
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill)
{
    if (!std::isfinite(fill))
        throw ContractViolation("matrix fill value must be finite");
}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data))
{
    if (data_.size() != rows * cols)
        throw ContractViolation("matrix data length " + std::to_string(data_.size()) + " != " +
                                std::to_string(rows) + "x" + std::to_string(cols));
    require_finite(data_);
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows)
{
    rows_ = rows.size();
    cols_ = rows_ ? rows.begin()->size() : 0;
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
        if (r.size() != cols_)
            throw ContractViolation("ragged matrix literal");
        data_.insert(data_.end(), r.begin(), r.end());
    }
    require_finite(data_);
}

Matrix Matrix::identity(std::size_t n)
{
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i)
        m(i, i) = 1.0;
    return m;
}

Matrix Matrix::diagonal(std::span<const double> values)
{
    Matrix m(values.size(), values.size());
    for (std::size_t i = 0; i < values.size(); ++i)
        m(i, i) = values[i];
    return m;
}

Matrix Matrix::column(std::span<const double> values)
{
    return Matrix(values.size(), 1, std::vector<double>(values.begin(), values.end()));
}

std::vector<double> Matrix::col(std::size_t c) const
{
    std::vector<double> out(rows_);
    for (std::size_t r = 0; r < rows_; ++r)
        out[r] = (*this)(r, c);
    return out;
}

void Matrix::set_col(std::size_t c, std::span<const double> values)
{
    for (std::size_t r = 0; r < rows_; ++r)
        (*this)(r, c) = values[r];
}

Matrix Matrix::transpose() const
{
    Matrix t(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r)
        for (std::size_t c = 0; c < cols_; ++c)
            t(c, r) = (*this)(r, c);
    return t;
}

Matrix Matrix::block(std::size_t r0, std::size_t c0, std::size_t nr, std::size_t nc) const
{
    if (r0 + nr > rows_ || c0 + nc > cols_)
        throw ContractViolation("block out of range");
    Matrix b(nr, nc);
    for (std::size_t r = 0; r < nr; ++r)
        for (std::size_t c = 0; c < nc; ++c)
            b(r, c) = (*this)(r0 + r, c0 + c);
    return b;
}

Matrix& Matrix::operator+=(const Matrix& o)
{
    if (!same_shape(o))
        throw ContractViolation("shape mismatch in +=");
    for (std::size_t i = 0; i < data_.size(); ++i)
        data_[i] += o.data_[i];
    return *this;
}

Matrix& Matrix::operator-=(const Matrix& o)
{
    if (!same_shape(o))
        throw ContractViolation("shape mismatch in -=");
    for (std::size_t i = 0; i < data_.size(); ++i)
        data_[i] -= o.data_[i];
    return *this;
}

Matrix& Matrix::operator*=(double s)
{
    for (double& v : data_)
        v *= s;
    return *this;
}

bool Matrix::all_finite() const noexcept
{
    for (double v : data_)
        if (!std::isfinite(v))
            return false;
    return true;
}

Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
Matrix operator*(Matrix a, double s) { return a *= s; }
Matrix operator*(double s, Matrix a) { return a *= s; }

double frobenius_norm(const Matrix& a) { return norm2(a.data()); }

double max_abs_diff(const Matrix& a, const Matrix& b)
{
    if (!a.same_shape(b))
        throw ContractViolation("shape mismatch in max_abs_diff");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
    return m;
}

double dot(std::span<const double> a, std::span<const double> b)
{
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        s += a[i] * b[i];
    return s;
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

void write_csv(std::ostream& os, const Matrix& m)
{
    os << m.rows() << ',' << m.cols() << '\n';
    auto old = os.precision(17);
    for (std::size_t r = 0; r < m.rows(); ++r) {
        for (std::size_t c = 0; c < m.cols(); ++c) {
            if (c)
                os << ',';
            os << m(r, c);
        }
        os << '\n';
    }
    os.precision(old);
}

Matrix read_csv(std::istream& is)
{
    std::string line;
    if (!std::getline(is, line))
        throw IoError("csv matrix: missing header");
    std::size_t rows = 0, cols = 0;
    char comma = 0;
    std::istringstream hs(line);
    if (!(hs >> rows >> comma >> cols) || comma != ',')
        throw IoError("csv matrix: bad header '" + line + "'");
    std::vector<double> data;
    data.reserve(rows * cols);
    for (std::size_t r = 0; r < rows; ++r) {
        if (!std::getline(is, line))
            throw IoError("csv matrix: expected " + std::to_string(rows) + " rows, got " + std::to_string(r));
        std::istringstream ls(line);
        std::string cell;
        std::size_t c = 0;
        while (std::getline(ls, cell, ',')) {
            try {
                data.push_back(std::stod(cell));
            } catch (const std::exception&) {
                throw IoError("csv matrix: bad value '" + cell + "' in row " + std::to_string(r));
            }
            ++c;
        }
        if (c != cols)
            throw IoError("csv matrix: row " + std::to_string(r) + " has " + std::to_string(c) + " values");
    }
    return Matrix(rows, cols, std::move(data));
}

namespace io {

void put_u64(std::ostream& os, std::uint64_t v)
{
    unsigned char b[8];
    for (int i = 0; i < 8; ++i)
        b[i] = static_cast<unsigned char>(v >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 8);
}

void put_f64(std::ostream& os, double v) { put_u64(os, std::bit_cast<std::uint64_t>(v)); }

std::uint64_t get_u64(std::istream& is)
{
    unsigned char b[8];
    if (!is.read(reinterpret_cast<char*>(b), 8))
        throw IoError("binary stream truncated");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
        v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

double get_f64(std::istream& is) { return std::bit_cast<double>(get_u64(is)); }

}  // namespace io

void write_binary(std::ostream& os, const Matrix& m)
{
    io::put_u64(os, m.rows());
    io::put_u64(os, m.cols());
    for (double v : m.data())
        io::put_f64(os, v);
}

Matrix read_binary(std::istream& is)
{
    const auto rows = io::get_u64(is);
    const auto cols = io::get_u64(is);
    if (rows > (1u << 26) || cols > (1u << 26) || rows * cols > (1ull << 30))
        throw IoError("binary matrix: implausible dimensions");
    std::vector<double> data(rows * cols);
    for (double& v : data)
        v = io::get_f64(is);
    return Matrix(rows, cols, std::move(data));
}

}  // namespace mmcr
