#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ssflab/band_matrix.hpp"
#include "ssflab/random_field.hpp"

namespace ssflab {

using Coords = std::array<int, 3>;

// Rectangular lattice of n_0 x ... x n_{d-1} sites with spacing h. Sites are indexed
// row-major with axis 0 slowest; every module relies on this convention.
class Grid {
 public:
  Grid() = default;

  int dimension() const { return dimension_; }
  double spacing() const { return spacing_; }
  const std::array<int, 3>& extents() const { return extents_; }
  int extent(int axis) const { return extents_[axis]; }
  std::size_t site_count() const { return sites_; }
  std::size_t stride(int axis) const { return strides_[axis]; }

  std::size_t index(const Coords& c) const;
  Coords coords(std::size_t index) const;
  bool contains(const Coords& c) const;
  std::string id() const;

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  friend Grid build_grid(int, double, const std::vector<int>&);
  int dimension_ = 1;
  double spacing_ = 1.0;
  std::array<int, 3> extents_{1, 1, 1};
  std::array<std::size_t, 3> strides_{1, 1, 1};
  std::size_t sites_ = 1;
};

Grid build_grid(int dimension, double spacing, const std::vector<int>& extents);

// Closed integer box [lo_i, hi_i] of grid sites.
struct SiteBox {
  int dimension = 1;
  Coords lo{0, 0, 0};
  Coords hi{0, 0, 0};

  static SiteBox make(const Grid& grid, const Coords& lo, const Coords& hi);
  static SiteBox full(const Grid& grid);

  int extent(int axis) const { return hi[axis] - lo[axis] + 1; }
  std::size_t site_count() const;
  bool contains(const Coords& c) const;
  // Number of nearest-neighbour bonds crossing the box boundary.
  std::size_t boundary_faces() const;
  double volume(double spacing) const;
  double surface_measure(double spacing) const;
  std::vector<std::size_t> sites(const Grid& grid) const;
  std::vector<std::size_t> complement_sites(const Grid& grid) const;
  std::string describe() const;
};

// Single-site profile f given on a patch of sites relative to its anchor.
struct SingleSiteProfile {
  std::string id;
  int dimension = 1;
  Coords lower{0, 0, 0};
  Coords extent{1, 1, 1};
  std::vector<double> values;
  std::optional<double> decay_rate;

  // f = depth on the anchor site only.
  static SingleSiteProfile point(int dimension, double depth);
  // f = depth on the width^d block of sites starting at the anchor.
  static SingleSiteProfile cell(int dimension, int width, double depth);
  // f(x) = depth * exp(-rate |x|) (Euclidean distance in length units), truncated where
  // |f| < 1e-14 max|f|.
  static SingleSiteProfile exponential(int dimension, double spacing, double depth, double rate);

  double at(const Coords& offset) const;
  bool fits_in_cell(int cell_sites) const;
};

// Anchor points x_j of the coupling sublattice: full Z^d, or a hyperplane Z^{d-1}
// sitting at a fixed coordinate of `normal_axis`.
struct AnchorLattice {
  int cell = 1;  // sites per unit of length
  Coords origin{0, 0, 0};
  int normal_axis = -1;

  int sublattice_dimension(int grid_dimension) const {
    return normal_axis < 0 ? grid_dimension : grid_dimension - 1;
  }
  Coords anchor_site(int grid_dimension, const Coords& j) const;
};

// Every lattice point whose anchor site lies in the grid.
LatticeWindow covering_window(const Grid& grid, const AnchorLattice& anchors);

struct Cutoff {
  enum class Mode { none, sharp, lattice_sum };
  Mode mode = Mode::none;
  SiteBox box;

  static Cutoff none() { return {}; }
  static Cutoff sharp(const SiteBox& b) { return {Mode::sharp, b}; }
  static Cutoff lattice_sum(const SiteBox& b) { return {Mode::lattice_sum, b}; }
  std::string describe() const;
};

struct PotentialField {
  std::vector<double> values;
  std::string profile_id;
  std::string coupling_id;
  Cutoff cutoff;

  std::string id() const;
  double min() const;
  double max() const;
};

PotentialField zero_potential(const Grid& grid);

PotentialField assemble_potential(const Grid& grid, const SingleSiteProfile& profile, const CouplingField& couplings,
                                  const AnchorLattice& anchors, const Cutoff& cutoff);

// chi_Lambda V.
PotentialField apply_sharp_cutoff(const Grid& grid, const PotentialField& potential, const SiteBox& box);

// H = -Delta_h + V with Dirichlet conditions outside the grid.
struct Hamiltonian {
  Grid grid;
  std::vector<double> potential;
  SymmetricBandMatrix matrix;
  std::string potential_id;

  std::size_t size() const { return matrix.size(); }
};

Hamiltonian assemble_hamiltonian(const Grid& grid, const PotentialField& potential);
Hamiltonian free_hamiltonian(const Grid& grid);

// Principal submatrix of H on the sites of the box (H + infinity outside the box).
Hamiltonian dirichlet_restriction(const Hamiltonian& h, const SiteBox& box);

// Direct sum of the Dirichlet restrictions of H to the box and to its complement, kept in
// the ambient indexing: every bond crossing the box boundary is removed.
Hamiltonian dirichlet_decoupling(const Hamiltonian& h, const SiteBox& box);

// Columnar debug format: "# site value" rows for potentials, "# row col value" rows
// (lower triangle, diagonal included) for Hamiltonians.
void write_potential(std::ostream& os, const PotentialField& potential);
void write_hamiltonian(std::ostream& os, const Hamiltonian& h);
SymmetricBandMatrix read_hamiltonian_matrix(std::istream& is);

}  // namespace ssflab
