#pragma once

// Truncated Fock-space realization of -L_A + V_lambda.
//
// Field operators are normalized to the free covariance (m^2 - Delta)^{-1/2}:
// in mode k, phi_k = (a_k + a_k^dag) / sqrt(omega_k), so <phi_k^2> = 1/omega_k.
// The interaction lambda :V(w / sqrt(lambda)): is normal ordered exactly in
// operator form, mode by mode:
//   :phi_k^p: = omega_k^{-p/2} sum_r C(p, r) (a_k^dag)^r a_k^{p-r}.

#include "pphi2/detail/parallel.hpp"
#include "pphi2/error.hpp"
#include "pphi2/harmonic.hpp"
#include "pphi2/lanczos.hpp"
#include "pphi2/potential.hpp"
#include "pphi2/spectral.hpp"

#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace pphi2 {

/// Occupation-number basis {n : sum_k n_k <= n_max} in graded lexicographic order:
/// by total quanta, then lexicographically descending in (n_0, n_1, ...).
class FockBasis {
public:
    FockBasis() = default;
    FockBasis(std::vector<double> frequencies, int n_max, std::size_t max_dimension = 2'000'000)
        : frequencies_(std::move(frequencies)), n_max_(n_max)
    {
        detail::require(!frequencies_.empty(), "fock.K: at least one mode is required");
        detail::require(n_max >= 0, "fock.N_max: must be nonnegative");
        const int k = modes();
        // dimension = C(n_max + K, K), guarded before enumeration
        double dim = 1;
        for (int i = 1; i <= k; ++i) dim = dim * (n_max + i) / i;
        if (dim > static_cast<double>(max_dimension)) {
            throw ValidationError("fock: basis dimension " + std::to_string(static_cast<long long>(dim)) +
                                  " exceeds the memory guard " + std::to_string(max_dimension));
        }
        const double radix = n_max + 1.0;
        detail::require(std::pow(radix, k) < 1.8e19, "fock: occupation key does not fit in 64 bits");

        std::vector<int> occ(k, 0);
        for (int total = 0; total <= n_max; ++total) enumerate(occ, 0, total);
        index_.reserve(size());
        for (std::size_t i = 0; i < size(); ++i) index_.emplace(key(occupation(i)), static_cast<std::uint32_t>(i));
    }

    int modes() const { return static_cast<int>(frequencies_.size()); }
    int n_max() const { return n_max_; }
    std::size_t size() const { return occupations_.size() / std::max(1, modes()); }
    const std::vector<double>& frequencies() const { return frequencies_; }

    std::span<const int> occupation(std::size_t i) const
    {
        return {occupations_.data() + i * modes(), static_cast<std::size_t>(modes())};
    }

    int total(std::size_t i) const
    {
        int t = 0;
        for (int n : occupation(i)) t += n;
        return t;
    }

    /// Eigenvalue of (-1)^N, the number parity implementing w -> -w.
    int parity(std::size_t i) const { return total(i) % 2 == 0 ? 1 : -1; }

    /// Index of an occupation vector, or -1 if outside the truncated basis.
    long long index_of(std::span<const int> occ) const
    {
        int t = 0;
        for (int n : occ) {
            if (n < 0) return -1;
            t += n;
        }
        if (t > n_max_) return -1;
        auto it = index_.find(key(occ));
        return it == index_.end() ? -1 : static_cast<long long>(it->second);
    }

private:
    void enumerate(std::vector<int>& occ, int mode, int remaining)
    {
        if (mode == modes() - 1) {
            occ[mode] = remaining;
            occupations_.insert(occupations_.end(), occ.begin(), occ.end());
            return;
        }
        for (int n = remaining; n >= 0; --n) {
            occ[mode] = n;
            enumerate(occ, mode + 1, remaining - n);
        }
    }

    std::uint64_t key(std::span<const int> occ) const
    {
        std::uint64_t k = 0;
        for (int i = modes() - 1; i >= 0; --i) k = k * static_cast<std::uint64_t>(n_max_ + 1) + occ[i];
        return k;
    }

    std::vector<double> frequencies_;
    int n_max_ = 0;
    std::vector<int> occupations_;
    std::unordered_map<std::uint64_t, std::uint32_t> index_;
};

/// sum_n a_n int :w(x)^n: weight(x) dx, before lambda scaling.
struct FockInteraction {
    std::vector<double> polynomial;
    Vector weight;  ///< node samples; may be negative
};

inline FockInteraction interaction_of(const ClassicalPotential& pot)
{
    return {pot.polynomial().coefficients(), pot.cutoff().samples()};
}

/// coefficient * prod_k :(a_k + a_k^dag)^{powers[k]}:
template <class Scalar>
struct CouplingTerm {
    std::vector<int> powers;
    int degree = 0;
    Scalar coefficient = 0;
};

struct AssemblyOptions {
    std::size_t max_dimension = 2'000'000;
    double coupling_budget = 5e7;  ///< multi-indices x grid nodes
    int threads = 1;
};

template <class Scalar = double>
struct FockHamiltonian {
    FockBasis basis;
    SparseMatrixT<Scalar> matrix;
    std::vector<CouplingTerm<Scalar>> terms;
    double lambda = 1;
    bool parity_even = false;  ///< only even-degree couplings present

    std::size_t dimension() const { return basis.size(); }

    double max_asymmetry() const
    {
        const SparseMatrixT<Scalar> t = matrix.transpose();
        const SparseMatrixT<Scalar> d = matrix - t;
        double worst = 0;
        for (Eigen::Index r = 0; r < d.outerSize(); ++r)
            for (typename SparseMatrixT<Scalar>::InnerIterator it(d, r); it; ++it)
                worst = std::max(worst, std::abs(double(it.value())));
        return worst;
    }

    double max_abs_entry() const
    {
        double worst = 0;
        for (Eigen::Index r = 0; r < matrix.outerSize(); ++r)
            for (typename SparseMatrixT<Scalar>::InnerIterator it(matrix, r); it; ++it)
                worst = std::max(worst, std::abs(double(it.value())));
        return worst;
    }

    /// Largest |H_ij| over entries joining states of opposite number parity.
    double parity_violation() const
    {
        double worst = 0;
        for (Eigen::Index r = 0; r < matrix.outerSize(); ++r)
            for (typename SparseMatrixT<Scalar>::InnerIterator it(matrix, r); it; ++it)
                if (basis.parity(static_cast<std::size_t>(r)) != basis.parity(static_cast<std::size_t>(it.col())))
                    worst = std::max(worst, std::abs(double(it.value())));
        return worst;
    }

    DenseMatrixT<Scalar> dense() const { return DenseMatrixT<Scalar>(matrix); }

    /// Principal submatrix on states of the given number parity (+1 or -1).
    SparseMatrixT<Scalar> parity_block(int parity) const
    {
        std::vector<long long> map(dimension(), -1);
        long long count = 0;
        for (std::size_t i = 0; i < dimension(); ++i)
            if (basis.parity(i) == parity) map[i] = count++;
        std::vector<Eigen::Triplet<Scalar>> trip;
        for (Eigen::Index r = 0; r < matrix.outerSize(); ++r) {
            if (map[r] < 0) continue;
            for (typename SparseMatrixT<Scalar>::InnerIterator it(matrix, r); it; ++it)
                if (map[it.col()] >= 0) trip.emplace_back(map[r], map[it.col()], it.value());
        }
        SparseMatrixT<Scalar> block(count, count);
        block.setFromTriplets(trip.begin(), trip.end());
        return block;
    }
};

namespace detail {

inline void multi_indices(int modes, int degree, std::vector<int>& current, int mode, std::vector<std::vector<int>>& out)
{
    if (mode == modes - 1) {
        current[mode] = degree;
        out.push_back(current);
        return;
    }
    for (int p = degree; p >= 0; --p) {
        current[mode] = p;
        multi_indices(modes, degree - p, current, mode + 1, out);
    }
}

template <class Scalar>
Scalar binomial(int n, int k)
{
    Scalar r = 1;
    for (int i = 1; i <= k; ++i) r = r * Scalar(n - k + i) / Scalar(i);
    return r;
}

/// <n - s + r| (a^dag)^r a^s |n> = sqrt(n! / (n-s)!) sqrt((n-s+r)! / (n-s)!).
template <class Scalar>
Scalar ladder_amplitude(int n, int s, int r)
{
    Scalar prod = 1;
    for (int i = n - s + 1; i <= n; ++i) prod *= Scalar(i);
    for (int i = n - s + 1; i <= n - s + r; ++i) prod *= Scalar(i);
    using std::sqrt;
    return sqrt(prod);
}

} // namespace detail

/// Coupling constants S_p for every multi-index p with sum p = n <= deg P.
template <class Scalar>
std::vector<CouplingTerm<Scalar>> coupling_terms(const ModeBasis& basis, const FockInteraction& interaction,
                                                 double lambda, int modes, const AssemblyOptions& opts = {})
{
    detail::require(modes >= 1 && modes <= basis.size(), "fock.K: must be in [1, number of basis modes]");
    detail::require(lambda > 0 && std::isfinite(lambda), "fock.lambda: must be positive");
    detail::require(interaction.weight.size() == basis.num_nodes(), "fock: weight sample count must equal num_nodes");
    const int nodes = basis.num_nodes();
    using std::pow;
    using std::sqrt;

    std::vector<CouplingTerm<Scalar>> terms;
    double work = 0;
    for (std::size_t n = 0; n < interaction.polynomial.size(); ++n) {
        if (interaction.polynomial[n] == 0.0) continue;
        std::vector<std::vector<int>> indices;
        std::vector<int> current(modes, 0);
        detail::multi_indices(modes, static_cast<int>(n), current, 0, indices);
        work += static_cast<double>(indices.size()) * nodes;
        if (work > opts.coupling_budget) {
            throw ValidationError("fock: coupling enumeration exceeds the budget; reduce K or the degree");
        }
        const Scalar scale = Scalar(interaction.polynomial[n]) * pow(Scalar(lambda), Scalar(1) - Scalar(n) / 2);
        for (const auto& p : indices) {
            Scalar multinomial = 1;
            {
                int placed = 0;
                for (int k = 0; k < modes; ++k) {
                    multinomial *= detail::binomial<Scalar>(placed + p[k], p[k]);
                    placed += p[k];
                }
            }
            Scalar overlap = 0;
            for (int j = 0; j < nodes; ++j) {
                Scalar prod = Scalar(basis.weight()) * Scalar(interaction.weight[j]);
                for (int k = 0; k < modes; ++k)
                    for (int q = 0; q < p[k]; ++q) prod *= Scalar(basis.shapes()(j, k));
                overlap += prod;
            }
            Scalar norm = 1;
            for (int k = 0; k < modes; ++k) norm *= pow(Scalar(basis.frequency(k)), -Scalar(p[k]) / 2);
            const Scalar c = scale * multinomial * overlap * norm;
            if (c != Scalar(0)) terms.push_back({p, static_cast<int>(n), c});
        }
    }
    return terms;
}

/// H = sum_k omega_k a_k^dag a_k + lambda :V(w / sqrt(lambda)): on the first K modes.
template <class Scalar = double>
FockHamiltonian<Scalar> assemble_hamiltonian(const ModeBasis& basis, const FockInteraction& interaction, double lambda,
                                             int modes, int n_max, const AssemblyOptions& opts = {})
{
    std::vector<double> freq(basis.frequencies().data(), basis.frequencies().data() + modes);
    FockHamiltonian<Scalar> h;
    h.basis = FockBasis(std::move(freq), n_max, opts.max_dimension);
    h.terms = coupling_terms<Scalar>(basis, interaction, lambda, modes, opts);
    h.lambda = lambda;
    h.parity_even = std::all_of(h.terms.begin(), h.terms.end(), [](const auto& t) { return t.degree % 2 == 0; });

    const std::size_t dim = h.basis.size();
    // Column-wise assembly; each column owns its buffer and merge order is fixed.
    std::vector<std::vector<std::pair<std::uint32_t, Scalar>>> columns(dim);
    detail::parallel_for(static_cast<int>(dim), opts.threads, [&](int col) {
        const auto occ = h.basis.occupation(col);
        std::map<std::uint32_t, Scalar> acc;
        Scalar diag = 0;
        for (int k = 0; k < modes; ++k) diag += Scalar(occ[k]) * Scalar(h.basis.frequencies()[k]);
        acc[col] += diag;

        std::vector<int> target(modes);
        for (const auto& term : h.terms) {
            // Enumerate creator counts r_k in [0, p_k] for every mode.
            std::vector<int> r(modes, 0);
            while (true) {
                Scalar amp = term.coefficient;
                bool valid = true;
                for (int k = 0; k < modes && valid; ++k) {
                    const int p = term.powers[k];
                    const int s = p - r[k];
                    if (occ[k] < s) {
                        valid = false;
                        break;
                    }
                    target[k] = occ[k] - s + r[k];
                    if (p > 0) amp *= detail::binomial<Scalar>(p, r[k]) * detail::ladder_amplitude<Scalar>(occ[k], s, r[k]);
                }
                if (valid) {
                    const long long row = h.basis.index_of(target);
                    if (row >= 0) acc[static_cast<std::uint32_t>(row)] += amp;
                }
                int k = 0;
                while (k < modes && r[k] == term.powers[k]) r[k++] = 0;
                if (k == modes) break;
                ++r[k];
            }
        }
        columns[col].assign(acc.begin(), acc.end());
    });

    std::vector<Eigen::Triplet<Scalar>> trip;
    for (std::size_t col = 0; col < dim; ++col)
        for (const auto& [row, value] : columns[col])
            if (value != Scalar(0)) trip.emplace_back(row, static_cast<int>(col), value);
    h.matrix.resize(dim, dim);
    h.matrix.setFromTriplets(trip.begin(), trip.end());
    return h;
}

template <class Scalar = double>
FockHamiltonian<Scalar> assemble_hamiltonian(const ClassicalPotential& pot, double lambda, int modes, int n_max,
                                             const AssemblyOptions& opts = {})
{
    detail::require(modes >= 1, "fock.K: must be >= 1");
    detail::require(n_max >= pot.polynomial().degree(), "fock.N_max: must be >= deg P");
    return assemble_hamiltonian<Scalar>(*pot.basis(), interaction_of(pot), lambda, modes, n_max, opts);
}

/// -L_A + Q_v with Q_v = int :w^2: v dx, independent of lambda.
template <class Scalar = double>
FockHamiltonian<Scalar> quadratic_hamiltonian(const ModeBasis& basis, const Vector& v, int modes, int n_max,
                                              const AssemblyOptions& opts = {})
{
    return assemble_hamiltonian<Scalar>(basis, FockInteraction{{0.0, 0.0, 1.0}, v}, 1.0, modes, n_max, opts);
}

struct SpectrumOptions {
    LanczosOptions lanczos;
    int dense_limit = 0;  ///< use the dense solver when dimension <= dense_limit
    bool vectors = true;  ///< dense path only: skip eigenvectors and residuals when false
};

template <class Scalar>
SpectrumResult<Scalar> lowest_eigenvalues(const SparseMatrixT<Scalar>& h, int count, const SpectrumOptions& opts)
{
    if (h.rows() <= opts.dense_limit) return dense_lowest_eigenvalues<Scalar>(DenseMatrixT<Scalar>(h), count, opts.vectors);
    return lowest_eigenvalues<Scalar>(h, count, opts.lanczos);
}

template <class Scalar>
SpectrumResult<Scalar> lowest_eigenvalues(const FockHamiltonian<Scalar>& h, int count, const SpectrumOptions& opts = {})
{
    return lowest_eigenvalues<Scalar>(h.matrix, count, opts);
}

// ---------------------------------------------------------------------------
// lambda scans

struct ScanOptions {
    SpectrumOptions spectrum{{}, 2000, true};
    AssemblyOptions assembly;
    int threads = 1;
};

struct LimitRow {
    double lambda = 0;
    double e1 = 0;
    double target = 0;
    double difference = 0;  ///< |E1 - target|
};

struct LimitCheck {
    std::vector<LimitRow> rows;
    std::vector<double> well_energies;  ///< E_i at each minimizer, same K truncation
    double target = 0;
    bool tail_decreasing = false;  ///< over the last three rows
};

/// E_1(lambda) against min_i E_i, the harmonic energies at the minimizers of U.
inline LimitCheck semiclassical_limit_check(const ClassicalPotential& pot, const MinimizerReport& minimizers,
                                            const std::vector<double>& lambdas, int modes, int n_max,
                                            const ScanOptions& opts = {})
{
    detail::require(!minimizers.minimizers.empty(), "limit-check: potential has no verified minimizers");
    detail::require(!lambdas.empty(), "limit-check: lambda list is empty");
    const auto truncated = build_basis(pot.basis()->grid(), pot.mass(), modes);
    LimitCheck out;
    out.target = std::numeric_limits<double>::infinity();
    for (const auto& z : minimizers.minimizers) {
        const double e = harmonic_ground_energy(*truncated, hessian_potential(pot, z.field)).energy;
        out.well_energies.push_back(e);
        out.target = std::min(out.target, e);
    }
    out.rows.resize(lambdas.size());
    detail::parallel_for(static_cast<int>(lambdas.size()), opts.threads, [&](int i) {
        const auto h = assemble_hamiltonian<double>(pot, lambdas[i], modes, n_max, opts.assembly);
        const auto spec = lowest_eigenvalues<double>(h, 1, opts.spectrum);
        out.rows[i] = {lambdas[i], spec.eigenvalues[0], out.target, std::abs(spec.eigenvalues[0] - out.target)};
    });
    const std::size_t n = out.rows.size();
    out.tail_decreasing = n >= 3 && out.rows[n - 2].difference < out.rows[n - 3].difference &&
                          out.rows[n - 1].difference < out.rows[n - 2].difference;
    return out;
}

struct GapRow {
    double lambda = 0;
    long double e1 = 0;
    long double e2 = 0;
    long double gap = 0;
    double log_gap = 0;
    double slope = std::numeric_limits<double>::quiet_NaN();  ///< -(log gap_i - log gap_{i-1}) / d lambda
    bool precision_limited = false;
    int ground_parity = 0;
    int excited_parity = 0;
};

/// Gap E_2 - E_1 per lambda with the running log-slope, computed in Scalar.
///
/// For even P the two number-parity blocks are diagonalized separately, so
/// the gap is a difference of block ground energies rather than of two
/// neighbouring eigenvalues of one solve.
template <class Scalar = double>
std::vector<GapRow> gap_scan(const ClassicalPotential& pot, const std::vector<double>& lambdas, int modes, int n_max,
                             const ScanOptions& opts = {})
{
    detail::require(lambdas.size() >= 1, "gap-scan: lambda list is empty");
    for (std::size_t i = 1; i < lambdas.size(); ++i)
        detail::require(lambdas[i] > lambdas[i - 1], "gap-scan: lambda list must be increasing");
    const double floor = 1e-13 * double(std::numeric_limits<Scalar>::epsilon()) / std::numeric_limits<double>::epsilon();

    std::vector<GapRow> rows(lambdas.size());
    detail::parallel_for(static_cast<int>(lambdas.size()), opts.threads, [&](int i) {
        const auto h = assemble_hamiltonian<Scalar>(pot, lambdas[i], modes, n_max, opts.assembly);
        GapRow row;
        row.lambda = lambdas[i];
        std::vector<std::pair<Scalar, int>> levels;
        if (h.parity_even) {
            for (int parity : {1, -1}) {
                const auto block = h.parity_block(parity);
                const int count = static_cast<int>(std::min<Eigen::Index>(2, block.rows()));
                if (count == 0) continue;
                const auto spec = lowest_eigenvalues<Scalar>(block, count, opts.spectrum);
                for (auto e : spec.eigenvalues) levels.emplace_back(e, parity);
            }
        } else {
            const auto spec = lowest_eigenvalues<Scalar>(h.matrix, 2, opts.spectrum);
            for (auto e : spec.eigenvalues) levels.emplace_back(e, 0);
        }
        std::sort(levels.begin(), levels.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
        if (levels.size() < 2) throw NumericalError("gap-scan: fewer than two eigenvalues");
        row.e1 = static_cast<long double>(levels[0].first);
        row.e2 = static_cast<long double>(levels[1].first);
        row.ground_parity = levels[0].second;
        row.excited_parity = levels[1].second;
        row.gap = static_cast<long double>(levels[1].first - levels[0].first);
        row.precision_limited = !(double(row.gap) > floor);
        row.log_gap = row.gap > 0 ? std::log(double(row.gap)) : -std::numeric_limits<double>::infinity();
        rows[i] = row;
    });
    for (std::size_t i = 1; i < rows.size(); ++i) {
        rows[i].slope = -(rows[i].log_gap - rows[i - 1].log_gap) / (rows[i].lambda - rows[i - 1].lambda);
    }
    return rows;
}

} // namespace pphi2
