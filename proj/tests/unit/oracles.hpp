#pragma once

// Dense reference implementations used by the unit and acceptance tests.

#include <complex>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include <spinbath/sparse_operator.hpp>

namespace oracle {

using spinbath::complex;
using spinbath::StateVector;

template <class Scalar>
Eigen::MatrixXcd dense(spinbath::SparseOperator<Scalar> const& op)
{
    auto const n = static_cast<Eigen::Index>(op.dim());
    Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(n, n);
    for (auto const& e : op.entries()) {
        m(static_cast<Eigen::Index>(e.row), static_cast<Eigen::Index>(e.col)) += complex(e.value);
    }
    return m;
}

inline Eigen::VectorXcd to_eigen(StateVector const& v)
{
    return Eigen::Map<Eigen::VectorXcd const>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline StateVector from_eigen(Eigen::VectorXcd const& v) { return {v.data(), v.data() + v.size()}; }

/// Gaussian complex vector normalised to one.
inline StateVector random_state(std::size_t dim, unsigned seed)
{
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> g;
    StateVector v(dim);
    double s = 0.0;
    for (auto& x : v) {
        x = complex(g(gen), g(gen));
        s += std::norm(x);
    }
    for (auto& x : v) { x /= std::sqrt(s); }
    return v;
}

/// Exact <A(t)> for a pure state by eigendecomposition of a Hermitian H.
struct DenseEvolution {
    Eigen::VectorXd energies;
    Eigen::MatrixXcd vectors;

    explicit DenseEvolution(Eigen::MatrixXcd const& h)
    {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h);
        energies = es.eigenvalues();
        vectors = es.eigenvectors();
    }

    Eigen::VectorXcd propagate(Eigen::VectorXcd const& psi, double t) const
    {
        Eigen::VectorXcd c = vectors.adjoint() * psi;
        for (Eigen::Index j = 0; j < c.size(); ++j) { c[j] *= std::exp(complex(0.0, -energies[j] * t)); }
        return vectors * c;
    }

    std::vector<double> series(Eigen::VectorXcd const& psi, Eigen::MatrixXcd const& a,
                               std::vector<double> const& times) const
    {
        std::vector<double> out;
        for (double t : times) {
            Eigen::VectorXcd const p = propagate(psi, t);
            out.push_back(p.dot(a * p).real());
        }
        return out;
    }
};

inline double max_abs_diff(std::vector<double> const& a, std::vector<double> const& b)
{
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) { m = std::max(m, std::abs(a[i] - b[i])); }
    return m;
}

} // namespace oracle
