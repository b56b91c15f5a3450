#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <span>
#include <sstream>
#include <type_traits>
#include <vector>

#include "error.hpp"

namespace spinbath {

using complex = std::complex<double>;
using StateVector = std::vector<complex>;

namespace detail {

template <class T>
struct is_complex : std::false_type {};
template <class T>
struct is_complex<std::complex<T>> : std::true_type {};

template <class T>
constexpr T conj(T const& x) noexcept
{
    if constexpr (is_complex<T>::value) { return std::conj(x); }
    else { return x; }
}

} // namespace detail

/// Operator on a finite-dimensional space stored in row-compressed form.
///
/// Assembly goes through a coordinate list (`Entry`); duplicates are summed
/// and exact zeros dropped. After assembly the operator is immutable and
/// `apply` may be called concurrently.
template <class Scalar>
class SparseOperator {
  public:
    using scalar_type = Scalar;

    struct Entry {
        std::size_t row;
        std::size_t col;
        Scalar value;
    };

    SparseOperator() = default;

    /// Zero operator of dimension `dim`.
    explicit SparseOperator(std::size_t dim, bool hermitian = true)
        : dim_{dim}, hermitian_{hermitian}, offsets_(dim + 1, 0)
    {
    }

    static SparseOperator assemble(std::size_t dim, std::vector<Entry> entries,
                                   bool hermitian)
    {
        for (auto const& e : entries) {
            if (e.row >= dim || e.col >= dim) {
                std::ostringstream msg;
                msg << "entry (" << e.row << ", " << e.col << ") outside dimension " << dim;
                throw DimensionError(msg.str());
            }
        }
        std::sort(entries.begin(), entries.end(), [](Entry const& a, Entry const& b) {
            return a.row != b.row ? a.row < b.row : a.col < b.col;
        });
        SparseOperator op(dim, hermitian);
        op.cols_.reserve(entries.size());
        op.values_.reserve(entries.size());
        for (std::size_t i = 0; i < entries.size();) {
            std::size_t j = i;
            Scalar sum{};
            while (j < entries.size() && entries[j].row == entries[i].row &&
                   entries[j].col == entries[i].col) {
                sum += entries[j].value;
                ++j;
            }
            if (sum != Scalar{}) {
                op.cols_.push_back(static_cast<std::uint32_t>(entries[i].col));
                op.values_.push_back(sum);
                ++op.offsets_[entries[i].row + 1];
            }
            i = j;
        }
        for (std::size_t r = 0; r < dim; ++r) { op.offsets_[r + 1] += op.offsets_[r]; }
        if (hermitian) { op.check_hermitian(); }
        return op;
    }

    /// Builds directly from CSR arrays whose rows are already sorted by column.
    static SparseOperator from_csr(std::size_t dim, std::vector<std::size_t> offsets,
                                   std::vector<std::uint32_t> cols,
                                   std::vector<Scalar> values, bool hermitian)
    {
        if (offsets.size() != dim + 1 || cols.size() != values.size() ||
            offsets.back() != cols.size()) {
            throw DimensionError("inconsistent CSR arrays");
        }
        SparseOperator op;
        op.dim_ = dim;
        op.hermitian_ = hermitian;
        op.offsets_ = std::move(offsets);
        op.cols_ = std::move(cols);
        op.values_ = std::move(values);
        return op;
    }

    static SparseOperator identity(std::size_t dim)
    {
        std::vector<Entry> e;
        e.reserve(dim);
        for (std::size_t i = 0; i < dim; ++i) { e.push_back({i, i, Scalar{1}}); }
        return assemble(dim, std::move(e), true);
    }

    std::size_t dim() const noexcept { return dim_; }
    std::size_t nnz() const noexcept { return values_.size(); }
    bool hermitian() const noexcept { return hermitian_; }

    std::span<std::size_t const> offsets() const noexcept { return offsets_; }
    std::span<std::uint32_t const> columns() const noexcept { return cols_; }
    std::span<Scalar const> values() const noexcept { return values_; }

    std::vector<Entry> entries() const
    {
        std::vector<Entry> out;
        out.reserve(nnz());
        for (std::size_t r = 0; r < dim_; ++r) {
            for (std::size_t k = offsets_[r]; k < offsets_[r + 1]; ++k) {
                out.push_back({r, cols_[k], values_[k]});
            }
        }
        return out;
    }

    Scalar at(std::size_t row, std::size_t col) const
    {
        auto first = cols_.begin() + static_cast<std::ptrdiff_t>(offsets_[row]);
        auto last = cols_.begin() + static_cast<std::ptrdiff_t>(offsets_[row + 1]);
        auto it = std::lower_bound(first, last, static_cast<std::uint32_t>(col));
        if (it == last || *it != col) { return Scalar{}; }
        return values_[static_cast<std::size_t>(it - cols_.begin())];
    }

    /// y = op * x. `y` must not alias `x`.
    template <class V>
    void apply(std::span<V const> x, std::span<V> y) const
    {
        if (x.size() != dim_ || y.size() != dim_) {
            std::ostringstream msg;
            msg << "apply: operator dim " << dim_ << ", vectors " << x.size() << "/"
                << y.size();
            throw DimensionError(msg.str());
        }
        for (std::size_t r = 0; r < dim_; ++r) {
            V acc{};
            for (std::size_t k = offsets_[r]; k < offsets_[r + 1]; ++k) {
                acc += values_[k] * x[cols_[k]];
            }
            y[r] = acc;
        }
    }

    template <class V>
    std::vector<V> apply(std::vector<V> const& x) const
    {
        std::vector<V> y(x.size());
        apply(std::span<V const>(x), std::span<V>(y));
        return y;
    }

    SparseOperator scaled(Scalar factor) const
    {
        SparseOperator out = *this;
        for (auto& v : out.values_) { v *= factor; }
        return out;
    }

    /// Largest |A_ij - conj(A_ji)| over stored entries.
    double hermiticity_defect() const
    {
        double worst = 0.0;
        for (std::size_t r = 0; r < dim_; ++r) {
            for (std::size_t k = offsets_[r]; k < offsets_[r + 1]; ++k) {
                auto mirror = detail::conj(at(cols_[k], r));
                worst = std::max(worst, std::abs(values_[k] - mirror));
            }
        }
        return worst;
    }

  private:
    void check_hermitian() const
    {
        for (std::size_t r = 0; r < dim_; ++r) {
            for (std::size_t k = offsets_[r]; k < offsets_[r + 1]; ++k) {
                if (std::abs(values_[k] - detail::conj(at(cols_[k], r))) > 0.0) {
                    std::ostringstream msg;
                    msg << "operator flagged hermitian but entry (" << r << ", "
                        << cols_[k] << ") has no conjugate partner";
                    throw Error(msg.str());
                }
            }
        }
    }

    std::size_t dim_ = 0;
    bool hermitian_ = true;
    std::vector<std::size_t> offsets_{0};
    std::vector<std::uint32_t> cols_;
    std::vector<Scalar> values_;
};

using RealOperator = SparseOperator<double>;
using ComplexOperator = SparseOperator<complex>;

/// lhs + factor * rhs. The result is hermitian when both operands are and
/// the factor is real.
template <class Scalar>
SparseOperator<Scalar> add(SparseOperator<Scalar> const& lhs,
                           SparseOperator<Scalar> const& rhs, Scalar factor = Scalar{1})
{
    if (lhs.dim() != rhs.dim()) {
        std::ostringstream msg;
        msg << "add: dimension mismatch " << lhs.dim() << " vs " << rhs.dim();
        throw DimensionError(msg.str());
    }
    auto entries = lhs.entries();
    auto more = rhs.entries();
    entries.reserve(entries.size() + more.size());
    for (auto& e : more) { entries.push_back({e.row, e.col, factor * e.value}); }
    bool const herm = lhs.hermitian() && rhs.hermitian() &&
                      std::abs(std::imag(complex(factor))) == 0.0;
    return SparseOperator<Scalar>::assemble(lhs.dim(), std::move(entries), herm);
}

template <class T>
complex inner(std::span<T const> x, std::span<T const> y)
{
    complex acc{};
    for (std::size_t i = 0; i < x.size(); ++i) { acc += complex(detail::conj(x[i])) * complex(y[i]); }
    return acc;
}

inline complex inner(StateVector const& x, StateVector const& y)
{
    return inner(std::span<complex const>(x), std::span<complex const>(y));
}

inline double norm(StateVector const& x)
{
    double s = 0.0;
    for (auto const& v : x) { s += std::norm(v); }
    return std::sqrt(s);
}

/// <x|op|x>.
template <class Scalar>
complex expectation(SparseOperator<Scalar> const& op, StateVector const& x)
{
    auto y = op.apply(x);
    return inner(x, y);
}

} // namespace spinbath
