#pragma once

#include <complex>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include <json.hpp>

#include "escape/density.hpp"
#include "escape/escape_curve.hpp"
#include "escape/grid.hpp"
#include "escape/holes.hpp"
#include "escape/induced.hpp"

namespace escape {

/// Which mass the open operator removes: mass arriving in H after a step
/// (columns of hole cells) or mass sitting in H before it (rows).
enum class HoleConvention { Arrival, Presence };

/// Sparse Ulam matrix M[i][j] = Leb(I_i ∩ f^{-1} I_j) / Leb(I_i) in CSR form,
/// with its transpose kept for deterministic parallel density pushes.
/// lost[i] is the fraction of row i that leaves the grid or saturates.
class UlamOperator {
public:
    UlamOperator() = default;
    UlamOperator(std::vector<double> edges, std::vector<std::vector<std::pair<int, double>>> rows,
                 std::vector<double> lost);

    int cells() const { return static_cast<int>(edges_.size()) - 1; }
    const std::vector<double>& edges() const { return edges_; }
    double width(int i) const { return edges_[i + 1] - edges_[i]; }
    const std::vector<double>& lost() const { return lost_; }
    std::size_t nonzeros() const { return col_.size(); }

    bool is_open() const { return open_; }
    const Hole& hole() const { return hole_; }
    HoleConvention convention() const { return convention_; }
    double snap_error() const { return snap_error_; }
    /// Cell range [first, last) covered by the (snapped) hole.
    std::pair<int, int> hole_cells() const { return hole_cells_; }

    double row_sum(int i) const;
    /// Visits the stored entries of row i.
    template <class F>
    void for_row(int i, F f) const
    {
        for (std::int64_t p = row_ptr_[i]; p < row_ptr_[i + 1]; ++p)
            f(col_[p], val_[p]);
    }

    /// out = M^T m (mass vector pushed one step forward).
    void push(const std::vector<double>& m, std::vector<double>& out) const;

    friend UlamOperator open_ulam(const UlamOperator& op, const Hole& hole, HoleConvention conv,
                                  const GridDensity* density);

private:
    void build_transpose();

    std::vector<double> edges_;
    std::vector<std::int64_t> row_ptr_;
    std::vector<int> col_;
    std::vector<double> val_;
    std::vector<std::int64_t> t_ptr_;
    std::vector<int> t_row_;
    std::vector<double> t_val_;
    std::vector<double> lost_;

    bool open_ = false;
    Hole hole_ = Hole::empty();
    HoleConvention convention_ = HoleConvention::Arrival;
    double snap_error_ = 0.0;
    std::pair<int, int> hole_cells_{0, 0};
};

/// Exact Ulam matrix of a map on the given edges (interval preimages per branch).
UlamOperator build_ulam(const PiecewiseMap& map, const std::vector<double>& edges);
/// Same on a graded grid over the phase interval, focused on indifferent points.
/// The smallest cell bounds the self-loop weight at the fixed point, and with it
/// the number of power iterations the density needs.
UlamOperator build_ulam(const PiecewiseMap& map, int cells,
                        GradingSpec grading = {1.05, 1e-7, {}, {}});

struct InducedUlamOptions {
    int subsamples = 64;
    int cap = 1000;
};

/// Ulam matrix of the first-return map on edges covering the base. Each cell
/// is cut into `subsamples` pieces whose images under F^R are spread over the
/// target cells; pieces cut by first-return cell boundaries are bisected.
UlamOperator build_ulam_induced(const InducedSystem& sys, const std::vector<double>& edges,
                                const InducedUlamOptions& opts = {});

/// Open operator. Hole edges are snapped to the grid; throws SnapTooCoarse
/// when snapping changes the hole measure by more than 1% (measured with
/// `density` when given, Lebesgue otherwise).
UlamOperator open_ulam(const UlamOperator& op, const Hole& hole,
                       HoleConvention conv = HoleConvention::Arrival,
                       const GridDensity* density = nullptr);

struct SpectralResult {
    double lambda = 0.0;
    std::vector<double> eigvec; // density values, sum eigvec * width = 1
    double residual = 0.0;      // ||M^T v - lambda v||_1 on masses
    int iterations = 0;
};

/// Stationary density of a closed operator by power iteration from uniform.
SpectralResult invariant_density(const UlamOperator& op, double tol = 1e-12,
                                 int max_iter = 100000);

/// Leading eigenvalue of a (sub)stochastic operator. The spectral radius is
/// taken over strongly connected components, so reducible matrices with
/// repeated eigenvalues are handled exactly.
SpectralResult leading_eigenvalue(const UlamOperator& op, double tol = 1e-12,
                                  int max_iter = 100000);

GridDensity to_density(const UlamOperator& op, const SpectralResult& r);
/// Cell masses of a density on the operator's grid.
std::vector<double> cell_masses(const UlamOperator& op, const GridDensity& h);

/// survival[n] = total mass after n open steps starting from `mass`.
EscapeCurve escape_curve_ulam(const UlamOperator& op, const std::vector<double>& mass, int N);

/// All eigenvalues of a small operator (at most 512 cells), by decreasing modulus.
std::vector<std::complex<double>> dense_spectrum(const UlamOperator& op);

/// Triplet CSV (row, col, value).
void write_triplets(std::ostream& os, const UlamOperator& op);
nlohmann::json to_json(const SpectralResult& r, bool with_vector = false);

} // namespace escape
