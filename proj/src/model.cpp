#include "ssflab/model.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace ssflab {

// ---------------------------------------------------------------------------
// Grid

Grid build_grid(int dimension, double spacing, const std::vector<int>& extents) {
  if (dimension < 1 || dimension > 3) throw std::invalid_argument("build_grid: dimension must be 1, 2 or 3");
  if (!(spacing > 0.0) || !std::isfinite(spacing)) throw std::invalid_argument("build_grid: spacing must be positive");
  if (extents.size() != static_cast<std::size_t>(dimension))
    throw std::invalid_argument("build_grid: need one extent per axis");
  Grid g;
  g.dimension_ = dimension;
  g.spacing_ = spacing;
  for (int a = 0; a < dimension; ++a) {
    if (extents[a] < 1) throw std::invalid_argument("build_grid: every extent must be at least 1");
    g.extents_[a] = extents[a];
  }
  std::size_t s = 1;
  for (int a = 2; a >= 0; --a) {
    g.strides_[a] = s;
    s *= static_cast<std::size_t>(g.extents_[a]);
  }
  g.sites_ = s;
  return g;
}

std::size_t Grid::index(const Coords& c) const {
  if (!contains(c)) throw std::out_of_range("Grid::index: coordinates outside grid");
  std::size_t i = 0;
  for (int a = 0; a < dimension_; ++a) i += strides_[a] * static_cast<std::size_t>(c[a]);
  return i;
}

Coords Grid::coords(std::size_t index) const {
  if (index >= sites_) throw std::out_of_range("Grid::coords: index outside grid");
  Coords c{0, 0, 0};
  for (int a = 0; a < dimension_; ++a) {
    c[a] = static_cast<int>(index / strides_[a]);
    index %= strides_[a];
  }
  return c;
}

bool Grid::contains(const Coords& c) const {
  for (int a = 0; a < 3; ++a) {
    const int ext = a < dimension_ ? extents_[a] : 1;
    if (c[a] < 0 || c[a] >= ext) return false;
  }
  return true;
}

std::string Grid::id() const {
  std::ostringstream os;
  os << "grid(d=" << dimension_ << ",h=" << std::setprecision(17) << spacing_ << ",n=";
  for (int a = 0; a < dimension_; ++a) os << (a ? "x" : "") << extents_[a];
  os << ")";
  return os.str();
}

// ---------------------------------------------------------------------------
// SiteBox

SiteBox SiteBox::make(const Grid& grid, const Coords& lo, const Coords& hi) {
  SiteBox b;
  b.dimension = grid.dimension();
  for (int a = 0; a < 3; ++a) {
    if (a >= b.dimension) continue;
    if (lo[a] > hi[a]) throw std::invalid_argument("SiteBox: lo must not exceed hi");
    if (lo[a] < 0 || hi[a] >= grid.extent(a)) throw std::invalid_argument("SiteBox: box outside grid");
    b.lo[a] = lo[a];
    b.hi[a] = hi[a];
  }
  return b;
}

SiteBox SiteBox::full(const Grid& grid) {
  Coords hi{0, 0, 0};
  for (int a = 0; a < grid.dimension(); ++a) hi[a] = grid.extent(a) - 1;
  return make(grid, {0, 0, 0}, hi);
}

std::size_t SiteBox::site_count() const {
  std::size_t s = 1;
  for (int a = 0; a < dimension; ++a) s *= static_cast<std::size_t>(extent(a));
  return s;
}

bool SiteBox::contains(const Coords& c) const {
  for (int a = 0; a < dimension; ++a)
    if (c[a] < lo[a] || c[a] > hi[a]) return false;
  return true;
}

std::size_t SiteBox::boundary_faces() const {
  std::size_t faces = 0;
  for (int a = 0; a < dimension; ++a) {
    std::size_t cross = 1;
    for (int b = 0; b < dimension; ++b)
      if (b != a) cross *= static_cast<std::size_t>(extent(b));
    faces += 2 * cross;
  }
  return faces;
}

double SiteBox::volume(double spacing) const {
  return static_cast<double>(site_count()) * std::pow(spacing, dimension);
}

double SiteBox::surface_measure(double spacing) const {
  return static_cast<double>(boundary_faces()) * std::pow(spacing, dimension - 1);
}

std::vector<std::size_t> SiteBox::sites(const Grid& grid) const {
  std::vector<std::size_t> out;
  out.reserve(site_count());
  for (std::size_t i = 0; i < grid.site_count(); ++i)
    if (contains(grid.coords(i))) out.push_back(i);
  return out;
}

std::vector<std::size_t> SiteBox::complement_sites(const Grid& grid) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < grid.site_count(); ++i)
    if (!contains(grid.coords(i))) out.push_back(i);
  return out;
}

std::string SiteBox::describe() const {
  std::ostringstream os;
  os << "box[";
  for (int a = 0; a < dimension; ++a) os << (a ? "x" : "") << lo[a] << ".." << hi[a];
  os << "]";
  return os.str();
}

// ---------------------------------------------------------------------------
// Profiles

SingleSiteProfile SingleSiteProfile::point(int dimension, double depth) { return cell(dimension, 1, depth); }

SingleSiteProfile SingleSiteProfile::cell(int dimension, int width, double depth) {
  if (dimension < 1 || dimension > 3) throw std::invalid_argument("profile: dimension must be 1, 2 or 3");
  if (width < 1) throw std::invalid_argument("profile: width must be at least 1");
  if (!std::isfinite(depth)) throw std::invalid_argument("profile: depth must be finite");
  SingleSiteProfile p;
  p.dimension = dimension;
  std::size_t count = 1;
  for (int a = 0; a < dimension; ++a) {
    p.extent[a] = width;
    count *= static_cast<std::size_t>(width);
  }
  p.values.assign(count, depth);
  std::ostringstream os;
  os << "cell(w=" << width << ",depth=" << std::setprecision(17) << depth << ")";
  p.id = os.str();
  return p;
}

SingleSiteProfile SingleSiteProfile::exponential(int dimension, double spacing, double depth, double rate) {
  if (dimension < 1 || dimension > 3) throw std::invalid_argument("profile: dimension must be 1, 2 or 3");
  if (!(rate > 0.0)) throw std::invalid_argument("profile: decay rate must be positive");
  if (!(spacing > 0.0)) throw std::invalid_argument("profile: spacing must be positive");
  const double cutoff = 1e-14;
  const double rmax = std::log(1.0 / cutoff) / rate;
  const int radius = static_cast<int>(std::floor(rmax / spacing));
  SingleSiteProfile p;
  p.dimension = dimension;
  p.decay_rate = rate;
  std::size_t count = 1;
  for (int a = 0; a < dimension; ++a) {
    p.lower[a] = -radius;
    p.extent[a] = 2 * radius + 1;
    count *= static_cast<std::size_t>(p.extent[a]);
  }
  p.values.assign(count, 0.0);
  for (std::size_t i = 0; i < count; ++i) {
    std::size_t rest = i;
    double r2 = 0.0;
    for (int a = dimension - 1; a >= 0; --a) {
      const int off = static_cast<int>(rest % static_cast<std::size_t>(p.extent[a])) + p.lower[a];
      rest /= static_cast<std::size_t>(p.extent[a]);
      r2 += (off * spacing) * (off * spacing);
    }
    const double f = std::exp(-rate * std::sqrt(r2));
    if (f >= cutoff) p.values[i] = depth * f;
  }
  std::ostringstream os;
  os << "exp(depth=" << std::setprecision(17) << depth << ",rate=" << rate << ",h=" << spacing << ")";
  p.id = os.str();
  return p;
}

double SingleSiteProfile::at(const Coords& offset) const {
  std::size_t idx = 0;
  for (int a = 0; a < dimension; ++a) {
    const int o = offset[a] - lower[a];
    if (o < 0 || o >= extent[a]) return 0.0;
    idx = idx * static_cast<std::size_t>(extent[a]) + static_cast<std::size_t>(o);
  }
  return values[idx];
}

bool SingleSiteProfile::fits_in_cell(int cell_sites) const {
  if (decay_rate) return false;
  for (int a = 0; a < dimension; ++a)
    if (lower[a] < 0 || lower[a] + extent[a] > cell_sites) return false;
  return true;
}

// ---------------------------------------------------------------------------
// Anchors and potentials

Coords AnchorLattice::anchor_site(int grid_dimension, const Coords& j) const {
  Coords c{0, 0, 0};
  int k = 0;
  for (int a = 0; a < grid_dimension; ++a) {
    if (a == normal_axis) {
      c[a] = origin[a];
    } else {
      c[a] = origin[a] + cell * j[k++];
    }
  }
  return c;
}

namespace {

int floor_div(int a, int b) { return a >= 0 ? a / b : -((-a + b - 1) / b); }

}  // namespace

LatticeWindow covering_window(const Grid& grid, const AnchorLattice& anchors) {
  const int d = anchors.sublattice_dimension(grid.dimension());
  if (d < 1) throw std::invalid_argument("covering_window: hyperplane of a 1D grid is empty");
  Coords lo{0, 0, 0}, hi{0, 0, 0};
  int k = 0;
  for (int a = 0; a < grid.dimension(); ++a) {
    if (a == anchors.normal_axis) continue;
    // all j with 0 <= origin + cell*j <= extent - 1
    const int o = anchors.origin[a];
    const int c = anchors.cell;
    lo[k] = -floor_div(o, c);
    hi[k] = floor_div(grid.extent(a) - 1 - o, c);
    if (lo[k] > hi[k]) throw std::invalid_argument("covering_window: no anchor inside the grid");
    ++k;
  }
  return LatticeWindow::make(d, lo, hi);
}

std::string Cutoff::describe() const {
  switch (mode) {
    case Mode::none:
      return "none";
    case Mode::sharp:
      return "sharp(" + box.describe() + ")";
    case Mode::lattice_sum:
      return "lattice_sum(" + box.describe() + ")";
  }
  return "?";
}

std::string PotentialField::id() const { return profile_id + "|" + coupling_id + "|" + cutoff.describe(); }

double PotentialField::min() const {
  return values.empty() ? 0.0 : *std::min_element(values.begin(), values.end());
}

double PotentialField::max() const {
  return values.empty() ? 0.0 : *std::max_element(values.begin(), values.end());
}

PotentialField zero_potential(const Grid& grid) {
  PotentialField p;
  p.values.assign(grid.site_count(), 0.0);
  p.profile_id = "zero";
  p.coupling_id = "none";
  return p;
}

namespace {

void check_box_in_grid(const Grid& grid, const SiteBox& box) {
  if (box.dimension != grid.dimension()) throw std::invalid_argument("cutoff box dimension differs from grid");
  for (int a = 0; a < grid.dimension(); ++a)
    if (box.lo[a] < 0 || box.hi[a] >= grid.extent(a) || box.lo[a] > box.hi[a])
      throw std::invalid_argument("cutoff box outside grid");
}

}  // namespace

PotentialField assemble_potential(const Grid& grid, const SingleSiteProfile& profile, const CouplingField& couplings,
                                  const AnchorLattice& anchors, const Cutoff& cutoff) {
  const int d = grid.dimension();
  if (profile.dimension != d) throw std::invalid_argument("assemble_potential: profile dimension differs from grid");
  if (anchors.cell < 1) throw std::invalid_argument("assemble_potential: anchor cell must be positive");
  if (anchors.normal_axis >= d) throw std::invalid_argument("assemble_potential: normal axis outside grid");
  if (couplings.window.dimension != anchors.sublattice_dimension(d))
    throw std::invalid_argument("assemble_potential: coupling index outside sublattice (dimension mismatch)");
  if (cutoff.mode != Cutoff::Mode::none) check_box_in_grid(grid, cutoff.box);

  PotentialField pot;
  pot.values.assign(grid.site_count(), 0.0);
  pot.profile_id = profile.id;
  pot.coupling_id = couplings.id;
  pot.cutoff = cutoff;

  const std::size_t patch = profile.values.size();
  for (std::size_t w = 0; w < couplings.window.size(); ++w) {
    const double alpha = couplings.values[w];
    if (alpha == 0.0) continue;
    const Coords anchor = anchors.anchor_site(d, couplings.window.point(w));
    if (cutoff.mode == Cutoff::Mode::lattice_sum && !cutoff.box.contains(anchor)) continue;
    for (std::size_t p = 0; p < patch; ++p) {
      const double f = profile.values[p];
      if (f == 0.0) continue;
      Coords site = anchor;
      std::size_t rest = p;
      for (int a = d - 1; a >= 0; --a) {
        const auto ext = static_cast<std::size_t>(profile.extent[a]);
        site[a] += profile.lower[a] + static_cast<int>(rest % ext);
        rest /= ext;
      }
      if (!grid.contains(site)) continue;
      pot.values[grid.index(site)] += alpha * f;
    }
  }
  if (cutoff.mode == Cutoff::Mode::sharp) {
    for (std::size_t i = 0; i < pot.values.size(); ++i)
      if (!cutoff.box.contains(grid.coords(i))) pot.values[i] = 0.0;
  }
  return pot;
}

PotentialField apply_sharp_cutoff(const Grid& grid, const PotentialField& potential, const SiteBox& box) {
  if (potential.values.size() != grid.site_count())
    throw std::invalid_argument("apply_sharp_cutoff: potential does not match grid");
  check_box_in_grid(grid, box);
  PotentialField out = potential;
  for (std::size_t i = 0; i < out.values.size(); ++i)
    if (!box.contains(grid.coords(i))) out.values[i] = 0.0;
  if (potential.cutoff.mode == Cutoff::Mode::none) {
    out.cutoff = Cutoff::sharp(box);
  } else {
    out.coupling_id = potential.coupling_id + "|" + potential.cutoff.describe();
    out.cutoff = Cutoff::sharp(box);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Hamiltonians

Hamiltonian assemble_hamiltonian(const Grid& grid, const PotentialField& potential) {
  const std::size_t n = grid.site_count();
  if (potential.values.size() != n) throw std::invalid_argument("assemble_hamiltonian: grid/potential mismatch");
  const int d = grid.dimension();
  const double h2 = grid.spacing() * grid.spacing();
  const std::size_t kd = d == 1 ? 1 : grid.stride(0);
  Hamiltonian H;
  H.grid = grid;
  H.potential = potential.values;
  H.potential_id = potential.id();
  H.matrix = SymmetricBandMatrix(n, kd);
  const double diag0 = 2.0 * d / h2;
  const double hop = -1.0 / h2;
  for (std::size_t i = 0; i < n; ++i) {
    H.matrix.set(i, i, diag0 + potential.values[i]);
    const Coords c = grid.coords(i);
    for (int a = 0; a < d; ++a)
      if (c[a] + 1 < grid.extent(a)) H.matrix.set(i + grid.stride(a), i, hop);
  }
  return H;
}

Hamiltonian free_hamiltonian(const Grid& grid) { return assemble_hamiltonian(grid, zero_potential(grid)); }

Hamiltonian dirichlet_restriction(const Hamiltonian& h, const SiteBox& box) {
  const Grid& g = h.grid;
  if (box.dimension != g.dimension()) throw std::invalid_argument("dirichlet_restriction: dimension mismatch");
  for (int a = 0; a < g.dimension(); ++a)
    if (box.lo[a] < 0 || box.hi[a] >= g.extent(a) || box.lo[a] > box.hi[a])
      throw std::invalid_argument("dirichlet_restriction: box outside grid");
  if (box.site_count() == 0) throw std::invalid_argument("dirichlet_restriction: empty box");

  std::vector<int> ext(static_cast<std::size_t>(g.dimension()));
  for (int a = 0; a < g.dimension(); ++a) ext[static_cast<std::size_t>(a)] = box.extent(a);
  const Grid sub = build_grid(g.dimension(), g.spacing(), ext);

  const std::size_t n = g.site_count();
  std::vector<std::ptrdiff_t> map(n, -1);
  std::vector<std::size_t> sites = box.sites(g);
  for (std::size_t s = 0; s < sites.size(); ++s) map[sites[s]] = static_cast<std::ptrdiff_t>(s);

  const std::size_t kd = h.matrix.bandwidth();
  struct Entry {
    std::size_t i, j;
    double v;
  };
  std::vector<Entry> entries;
  std::size_t sub_kd = g.dimension() == 1 ? 1 : sub.stride(0);
  for (std::size_t j = 0; j < n; ++j) {
    if (map[j] < 0) continue;
    const std::size_t last = std::min(n - 1, j + kd);
    for (std::size_t i = j; i <= last; ++i) {
      if (map[i] < 0) continue;
      const double v = h.matrix(i, j);
      if (v == 0.0 && i != j) continue;
      const auto si = static_cast<std::size_t>(map[i]);
      const auto sj = static_cast<std::size_t>(map[j]);
      sub_kd = std::max(sub_kd, si - sj);
      entries.push_back({si, sj, v});
    }
  }
  Hamiltonian out;
  out.grid = sub;
  out.matrix = SymmetricBandMatrix(sites.size(), sub_kd);
  for (const auto& e : entries) out.matrix.set(e.i, e.j, e.v);
  out.potential.resize(sites.size());
  for (std::size_t s = 0; s < sites.size(); ++s) out.potential[s] = h.potential[sites[s]];
  out.potential_id = h.potential_id + "|restrict(" + box.describe() + ")";
  return out;
}

Hamiltonian dirichlet_decoupling(const Hamiltonian& h, const SiteBox& box) {
  const Grid& g = h.grid;
  if (box.dimension != g.dimension()) throw std::invalid_argument("dirichlet_decoupling: dimension mismatch");
  Hamiltonian out = h;
  const std::size_t n = g.site_count();
  std::vector<char> inside(n);
  for (std::size_t i = 0; i < n; ++i) inside[i] = box.contains(g.coords(i)) ? 1 : 0;
  const std::size_t kd = h.matrix.bandwidth();
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t last = std::min(n - 1, j + kd);
    for (std::size_t i = j + 1; i <= last; ++i)
      if (inside[i] != inside[j] && out.matrix(i, j) != 0.0) out.matrix.set(i, j, 0.0);
  }
  out.potential_id = h.potential_id + "|decouple(" + box.describe() + ")";
  return out;
}

// ---------------------------------------------------------------------------
// Columnar text

void write_potential(std::ostream& os, const PotentialField& potential) {
  os << "# ssflab potential v1\n# id " << potential.id() << "\n# site value\n";
  const auto old = os.precision(17);
  for (std::size_t i = 0; i < potential.values.size(); ++i) os << i << ' ' << potential.values[i] << '\n';
  os.precision(old);
}

void write_hamiltonian(std::ostream& os, const Hamiltonian& h) {
  const auto& m = h.matrix;
  os << "# ssflab hamiltonian v1\n# grid " << h.grid.id() << "\n# potential " << h.potential_id << "\n# size "
     << m.size() << " bandwidth " << m.bandwidth() << "\n# row col value\n";
  const auto old = os.precision(17);
  for (std::size_t j = 0; j < m.size(); ++j) {
    const std::size_t last = std::min(m.size() - 1, j + m.bandwidth());
    for (std::size_t i = j; i <= last; ++i) {
      const double v = m(i, j);
      if (i == j || v != 0.0) os << i << ' ' << j << ' ' << v << '\n';
    }
  }
  os.precision(old);
}

SymmetricBandMatrix read_hamiltonian_matrix(std::istream& is) {
  std::string line;
  std::size_t n = 0, kd = 0;
  bool have_size = false;
  SymmetricBandMatrix m;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream hs(line.substr(1));
      std::string word;
      hs >> word;
      if (word == "size") {
        std::string bw;
        hs >> n >> bw >> kd;
        if (!hs || bw != "bandwidth") throw std::runtime_error("read_hamiltonian_matrix: malformed size header");
        m = SymmetricBandMatrix(n, kd);
        have_size = true;
      }
      continue;
    }
    if (!have_size) throw std::runtime_error("read_hamiltonian_matrix: data before size header");
    std::istringstream ls(line);
    std::size_t i = 0, j = 0;
    double v = 0.0;
    if (!(ls >> i >> j >> v)) throw std::runtime_error("read_hamiltonian_matrix: malformed row: " + line);
    m.set(i, j, v);
  }
  if (!have_size) throw std::runtime_error("read_hamiltonian_matrix: missing size header");
  return m;
}

}  // namespace ssflab
