#include "ssflab/experiments.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "ssflab/brownian.hpp"
#include "ssflab/ssf.hpp"

namespace ssflab {

namespace {

Cell I(long long v) { return Cell{v}; }
Cell D(double v) { return Cell{v}; }

std::string num(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

std::string tagged(const std::string& name, const std::string& key, double v) {
  return name + "(" + key + "=" + num(v) + ")";
}

Grid cube_grid(int dim, double h, int extent) { return build_grid(dim, h, std::vector<int>(dim, extent)); }

SpectralLimits limits_from(const ExperimentConfig& c) {
  SpectralLimits l;
  if (c.params.count("dense_limit")) l.dense_limit = static_cast<std::size_t>(c.param("dense_limit"));
  return l;
}

ResultRecord start_record(const ExperimentConfig& c) {
  ResultRecord rec;
  rec.experiment = to_string(c.kind);
  rec.seed = c.seed;
  return rec;
}

CouplingField draw(const ExperimentConfig& c, const Grid& grid, const AnchorLattice& anchors, std::size_t r) {
  return sample_couplings(c.distribution, covering_window(grid, anchors), c.seed, r);
}

// ssf_counting certifies the energies and throws OnSpectrumError on a hit.
std::vector<long> certified_xi(const SymmetricBandMatrix& h, const SymmetricBandMatrix& h0,
                               const std::vector<double>& energies) {
  return ssf_counting(h, h0, energies).xi;
}

double sum_of(const std::vector<double>& v, const SpectralFunction& g) {
  std::vector<double> terms(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) terms[i] = g.value(v[i]);
  return pairwise_sum(terms);
}

std::vector<double> magnitudes(const std::vector<double>& v) {
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = std::abs(v[i]);
  return out;
}

void record_fit(ResultRecord& rec, const std::string& name, const std::vector<double>& x, const std::vector<double>& y,
                double low, double high, const std::string& x_label, const std::string& y_label) {
  const LinearFit fit = fit_loglog(x, y);
  rec.fits.push_back({name, fit, low, high});
  Series s{name, x_label, y_label, {}};
  for (std::size_t i = 0; i < x.size(); ++i) s.points.emplace_back(x[i], y[i]);
  rec.series.push_back(std::move(s));
  const bool ok = std::isfinite(fit.slope) && fit.slope >= low && fit.slope <= high;
  rec.check("slope " + name, ok, fit.slope, high,
            "window [" + num(low) + ", " + num(high) + "], 2se interval [" + num(fit.ci_low) + ", " +
                num(fit.ci_high) + "]");
}

SiteBox half_box(const SiteBox& box, int axis, bool upper) {
  SiteBox b = box;
  const int mid = box.lo[axis] + box.extent(axis) / 2;
  if (upper)
    b.lo[axis] = mid;
  else
    b.hi[axis] = mid - 1;
  return b;
}

}  // namespace

SingleSiteProfile make_profile(const ProfileSpec& spec, int dimension, double spacing) {
  switch (spec.kind) {
    case ProfileSpec::Kind::point:
      return SingleSiteProfile::point(dimension, spec.depth);
    case ProfileSpec::Kind::cell:
      return SingleSiteProfile::cell(dimension, spec.width, spec.depth);
    case ProfileSpec::Kind::exponential:
      return SingleSiteProfile::exponential(dimension, spacing, spec.depth, spec.rate);
  }
  throw std::invalid_argument("profile: unknown kind");
}

SiteBox centred_box(const Grid& grid, int extent) {
  Coords lo{0, 0, 0}, hi{0, 0, 0};
  for (int a = 0; a < grid.dimension(); ++a) {
    if (extent > grid.extent(a)) throw std::invalid_argument("centred_box: box larger than the grid");
    lo[a] = (grid.extent(a) - extent) / 2;
    hi[a] = lo[a] + extent - 1;
  }
  return SiteBox::make(grid, lo, hi);
}

AnchorLattice centred_anchors(const Grid& grid) {
  AnchorLattice a;
  for (int k = 0; k < grid.dimension(); ++k) a.origin[k] = grid.extent(k) / 2;
  return a;
}

// ---------------------------------------------------------------------------
// Bulk limit

ResultRecord run_bulk_limit(const ExperimentConfig& c, const Executor& ex) {
  ResultRecord rec = start_record(c);
  const int dim = c.grid.dimension;
  const double h = c.grid.spacing;
  const int lmax = c.schedule.back();
  const int ambient = c.grid.ambient_factor * lmax;
  const Grid grid = cube_grid(dim, h, ambient);
  const Hamiltonian h0 = free_hamiltonian(grid);
  const AnchorLattice anchors = centred_anchors(grid);
  const SingleSiteProfile profile = make_profile(c.profile, dim, h);
  const std::size_t nl = c.schedule.size(), ne = c.energies.size();
  const auto doubling = std::min<std::size_t>(c.realizations, static_cast<std::size_t>(c.param("doubling_realizations")));
  const double top_measure = centred_box(grid, lmax).volume(h);

  struct Run {
    std::vector<std::vector<long>> xi;  // [box][energy]
    std::vector<long> reference;        // Dirichlet counts on the largest box
    std::vector<double> shift;          // ambient doubling shift per energy (per volume)
  };
  const auto runs = ex.map<Run>(c.realizations, [&](std::size_t r) {
    Run out;
    const CouplingField alpha = draw(c, grid, anchors, r);
    const PotentialField full = assemble_potential(grid, profile, alpha, anchors, Cutoff::none());
    const Hamiltonian hd = dirichlet_restriction(assemble_hamiltonian(grid, full), centred_box(grid, lmax));
    for (double l : c.energies) out.reference.push_back(count_below(hd.matrix, l));
    for (int L : c.schedule) {
      const SiteBox box = centred_box(grid, L);
      const Hamiltonian hl = assemble_hamiltonian(grid, assemble_potential(grid, profile, alpha, anchors, Cutoff::lattice_sum(box)));
      out.xi.push_back(certified_xi(hl.matrix, h0.matrix, c.energies));
    }
    if (r < doubling) {
      const Grid big = cube_grid(dim, h, 2 * ambient);
      const AnchorLattice big_anchors = centred_anchors(big);
      const CouplingField big_alpha = draw(c, big, big_anchors, r);
      const SiteBox box = centred_box(big, lmax);
      const Hamiltonian hb =
          assemble_hamiltonian(big, assemble_potential(big, profile, big_alpha, big_anchors, Cutoff::lattice_sum(box)));
      const auto xi2 = certified_xi(hb.matrix, free_hamiltonian(big).matrix, c.energies);
      for (std::size_t k = 0; k < ne; ++k)
        out.shift.push_back(std::abs(static_cast<double>(xi2[k] - out.xi.back()[k])) / top_measure);
    }
    return out;
  });

  Table raw{"raw", {"L", "realization", "lambda", "xi_raw", "measure", "xi_per_volume", "dirichlet_count", "n_reference"}, {}};
  Table agg{"aggregate", {"L", "lambda", "mean_xi_per_volume", "variance", "mean_n_reference", "deviation"}, {}};
  for (std::size_t i = 0; i < nl; ++i) {
    const double meas = centred_box(grid, c.schedule[i]).volume(h);
    for (std::size_t r = 0; r < c.realizations; ++r)
      for (std::size_t k = 0; k < ne; ++k)
        raw.add({I(c.schedule[i]), I(static_cast<long long>(r)), D(c.energies[k]), I(runs[r].xi[i][k]), D(meas),
                 D(runs[r].xi[i][k] / meas), I(runs[r].reference[k]), D(runs[r].reference[k] / top_measure)});
  }

  const double slack = c.tolerance("variance_slack");
  for (std::size_t k = 0; k < ne; ++k) {
    const double lambda = c.energies[k];
    std::vector<double> ref(c.realizations);
    for (std::size_t r = 0; r < c.realizations; ++r) ref[r] = runs[r].reference[k] / top_measure;
    const double n_ref = sample_stats(ref).mean;
    Series dev{tagged("deviation", "lambda", lambda), "L", "deviation", {}};
    Series var{tagged("variance", "lambda", lambda), "L", "variance", {}};
    std::vector<double> variances, deviations;
    std::vector<double> last;
    for (std::size_t i = 0; i < nl; ++i) {
      const double meas = centred_box(grid, c.schedule[i]).volume(h);
      std::vector<double> v(c.realizations);
      for (std::size_t r = 0; r < c.realizations; ++r) v[r] = runs[r].xi[i][k] / meas;
      const SampleStats st = sample_stats(v);
      const double deviation = std::abs(st.mean + n_ref);
      agg.add({I(c.schedule[i]), D(lambda), D(st.mean), D(st.variance), D(n_ref), D(deviation)});
      dev.points.emplace_back(c.schedule[i], deviation);
      var.points.emplace_back(c.schedule[i], st.variance);
      variances.push_back(st.variance);
      deviations.push_back(deviation);
      if (i + 1 == nl) last = v;
    }
    rec.series.push_back(dev);
    rec.series.push_back(var);

    rec.check(tagged("deviation at largest box", "lambda", lambda), deviations.back() <= c.tolerance("deviation"),
              deviations.back(), c.tolerance("deviation"), "L=" + std::to_string(lmax));
    const bool drop = variances.back() < variances.front() || (variances.front() == 0.0 && variances.back() == 0.0);
    rec.check(tagged("variance drop", "lambda", lambda), drop, variances.back(), variances.front(),
              "var(L=" + std::to_string(lmax) + ") vs var(L=" + std::to_string(c.schedule.front()) + ")");
    double worst = 0.0;
    bool steps_ok = true;
    for (std::size_t i = 1; i < nl; ++i) {
      if (variances[i] > slack * variances[i - 1]) steps_ok = false;
      if (variances[i - 1] > 0.0) worst = std::max(worst, variances[i] / variances[i - 1]);
    }
    rec.check(tagged("self-averaging steps", "lambda", lambda), steps_ok, worst, slack,
              "largest ratio var(L_k+1)/var(L_k)");

    if (doubling > 0) {
      double shift = 0.0;
      for (std::size_t r = 0; r < doubling; ++r) shift = std::max(shift, runs[r].shift[k]);
      rec.check(tagged("ambient doubling", "lambda", lambda), shift <= c.tolerance("ambient_shift"), shift,
                c.tolerance("ambient_shift"), std::to_string(doubling) + " realizations on a doubled ambient box");
    }
    if (c.realizations >= 4) {
      const std::size_t half = c.realizations / 2;
      const SampleStats a = sample_stats(std::span<const double>(last).subspan(0, half));
      const SampleStats b = sample_stats(std::span<const double>(last).subspan(half));
      const double sigma = std::sqrt(a.variance / a.count + b.variance / b.count);
      const double gap = std::abs(a.mean - b.mean);
      const double allowed = c.tolerance("seed_block_sigma") * sigma;
      rec.check(tagged("seed-block agreement", "lambda", lambda), gap <= allowed || gap == 0.0, gap, allowed,
                "disjoint realization blocks at the largest box", false);
    }
  }
  rec.tables.push_back(std::move(raw));
  rec.tables.push_back(std::move(agg));
  return rec;
}

// ---------------------------------------------------------------------------
// Locality

ResultRecord run_locality(const ExperimentConfig& c, const Executor& ex) {
  ResultRecord rec = start_record(c);
  const double h = c.grid.spacing;
  const int m = c.grid.margin;
  const SpectralLimits limits = limits_from(c);
  const SpectralFunction g = c.function.make();
  const SingleSiteProfile profile = make_profile(c.profile, 2, h);
  const std::size_t nl = c.schedule.size();

  std::vector<Grid> grids;
  for (int L : c.schedule) grids.push_back(cube_grid(2, h, L + 2 * m));
  const auto free_diag = ex.map<Eigen::VectorXd>(nl, [&](std::size_t i) {
    return function_diagonal(eig_all(free_hamiltonian(grids[i]).matrix, true, limits), g);
  });

  struct Cellv {
    double inside = 0.0, outside = 0.0;
  };
  const auto cells = ex.map<Cellv>(nl * c.realizations, [&](std::size_t idx) {
    const std::size_t i = idx % nl, r = idx / nl;
    const Grid& grid = grids[i];
    const SiteBox box = centred_box(grid, c.schedule[i]);
    const AnchorLattice anchors = centred_anchors(grid);
    const PotentialField v = assemble_potential(grid, profile, draw(c, grid, anchors, r), anchors, Cutoff::none());
    const PotentialField cv = apply_sharp_cutoff(grid, v, box);
    const Eigen::VectorXd full = function_diagonal(eig_all(assemble_hamiltonian(grid, v).matrix, true, limits), g);
    const Eigen::VectorXd cut = function_diagonal(eig_all(assemble_hamiltonian(grid, cv).matrix, true, limits), g);
    const double meas = box.volume(h);
    const auto in_sites = box.sites(grid);
    const auto out_sites = box.complement_sites(grid);
    const Eigen::VectorXd d_in = full - cut;
    const Eigen::VectorXd d_out = cut - free_diag[i];
    return Cellv{partial_trace(d_in, in_sites) / meas, partial_trace(d_out, out_sites) / meas};
  });

  Table raw{"raw", {"L", "realization", "inside_trace", "outside_trace"}, {}};
  Table agg{"aggregate", {"L", "mean_inside", "mean_abs_inside", "var_inside", "mean_outside", "mean_abs_outside", "var_outside"}, {}};
  std::vector<double> x, y_in, y_out;
  for (std::size_t i = 0; i < nl; ++i) {
    std::vector<double> in(c.realizations), out(c.realizations);
    for (std::size_t r = 0; r < c.realizations; ++r) {
      in[r] = cells[r * nl + i].inside;
      out[r] = cells[r * nl + i].outside;
      raw.add({I(c.schedule[i]), I(static_cast<long long>(r)), D(in[r]), D(out[r])});
    }
    const SampleStats si = sample_stats(in), so = sample_stats(out);
    const double ai = sample_stats(magnitudes(in)).mean, ao = sample_stats(magnitudes(out)).mean;
    agg.add({I(c.schedule[i]), D(si.mean), D(ai), D(si.variance), D(so.mean), D(ao), D(so.variance)});
    x.push_back(c.schedule[i] * h);
    y_in.push_back(ai);
    y_out.push_back(ao);
  }
  rec.tables.push_back(std::move(raw));
  rec.tables.push_back(std::move(agg));

  const bool all_zero = std::all_of(y_in.begin(), y_in.end(), [](double v) { return v == 0.0; }) &&
                        std::all_of(y_out.begin(), y_out.end(), [](double v) { return v == 0.0; });
  if (all_zero) {
    rec.warnings.push_back("locality: both traces vanish identically (no potential inside the support of g)");
    rec.check("traces vanish", true, 0.0, 0.0, "degenerate run, no slope to fit");
    return rec;
  }
  record_fit(rec, "inside trace", x, y_in, c.tolerance("slope_low"), c.tolerance("slope_high"), "L", "mean |trace|/meas");
  record_fit(rec, "outside trace", x, y_out, c.tolerance("slope_low"), c.tolerance("slope_high"), "L", "mean |trace|/meas");
  return rec;
}

// ---------------------------------------------------------------------------
// Cutoff equivalence

ResultRecord run_cutoff_equivalence(const ExperimentConfig& c, const Executor& ex) {
  ResultRecord rec = start_record(c);
  const int dim = c.grid.dimension;
  const double h = c.grid.spacing;
  const SpectralFunction g = c.function.make();
  const Grid grid = cube_grid(dim, h, c.grid.ambient_factor * c.schedule.back());
  const AnchorLattice anchors = centred_anchors(grid);
  const std::size_t nl = c.schedule.size();

  auto difference = [&](const SingleSiteProfile& profile, const CouplingField& alpha, int L) {
    const SiteBox box = centred_box(grid, L);
    const PotentialField full = assemble_potential(grid, profile, alpha, anchors, Cutoff::none());
    const PotentialField sharp = apply_sharp_cutoff(grid, full, box);
    const PotentialField summed = assemble_potential(grid, profile, alpha, anchors, Cutoff::lattice_sum(box));
    if (sharp.values == summed.values) return 0.0;
    const auto es = eig_all(assemble_hamiltonian(grid, sharp).matrix).values;
    const auto el = eig_all(assemble_hamiltonian(grid, summed).matrix).values;
    return (sum_of(es, g) - sum_of(el, g)) / box.volume(h);
  };

  const SingleSiteProfile profile = make_profile(c.profile, dim, h);
  const bool scan = c.param("rate_scan") != 0.0 && c.profile.kind == ProfileSpec::Kind::exponential;
  const std::vector<double> rates = {0.5 * c.profile.rate, c.profile.rate, 2.0 * c.profile.rate};

  struct Run {
    std::vector<double> diff;  // per box
    std::vector<double> scan;  // per rate at the largest box
  };
  const auto runs = ex.map<Run>(c.realizations, [&](std::size_t r) {
    Run out;
    const CouplingField alpha = draw(c, grid, anchors, r);
    for (int L : c.schedule) out.diff.push_back(difference(profile, alpha, L));
    if (scan)
      for (double a : rates) {
        ProfileSpec p = c.profile;
        p.rate = a;
        out.scan.push_back(difference(make_profile(p, dim, h), alpha, c.schedule.back()));
      }
    return out;
  });

  Table raw{"raw", {"L", "realization", "normalized_difference"}, {}};
  Table agg{"aggregate", {"L", "mean_abs_difference", "mean_difference", "variance"}, {}};
  Series s{"mean |difference|", "L", "mean |tr difference|/meas", {}};
  std::vector<double> means;
  for (std::size_t i = 0; i < nl; ++i) {
    std::vector<double> v(c.realizations);
    for (std::size_t r = 0; r < c.realizations; ++r) {
      v[r] = runs[r].diff[i];
      raw.add({I(c.schedule[i]), I(static_cast<long long>(r)), D(v[r])});
    }
    const SampleStats st = sample_stats(v);
    const double mag = sample_stats(magnitudes(v)).mean;
    agg.add({I(c.schedule[i]), D(mag), D(st.mean), D(st.variance)});
    s.points.emplace_back(c.schedule[i], mag);
    means.push_back(mag);
  }
  rec.series.push_back(s);

  const bool degenerate = std::all_of(means.begin(), means.end(), [](double v) { return v == 0.0; });
  if (degenerate) {
    rec.warnings.push_back("cutoff: sharp and lattice-sum cutoffs coincide (compact profile); degenerate run");
    rec.check("strictly decreasing", true, 0.0, 0.0, "difference identically zero");
  } else {
    bool dec = true;
    double worst = 0.0;
    for (std::size_t i = 1; i < nl; ++i) {
      if (!(means[i] < means[i - 1])) dec = false;
      worst = std::max(worst, means[i] / means[i - 1]);
    }
    rec.check("strictly decreasing", dec, worst, 1.0, "largest ratio of consecutive means");
  }

  if (scan) {
    Table st{"rate_scan", {"rate", "L", "mean_abs_difference"}, {}};
    std::vector<double> by_rate;
    for (std::size_t k = 0; k < rates.size(); ++k) {
      std::vector<double> v(c.realizations);
      for (std::size_t r = 0; r < c.realizations; ++r) v[r] = std::abs(runs[r].scan[k]);
      by_rate.push_back(sample_stats(v).mean);
      st.add({D(rates[k]), I(c.schedule.back()), D(by_rate.back())});
    }
    const bool mono = by_rate[1] < by_rate[0] && by_rate[2] < by_rate[1];
    rec.check("monotone in tail decay rate", mono, by_rate[2], by_rate[0],
              "mean |difference| at rates " + num(rates[0]) + ", " + num(rates[1]) + ", " + num(rates[2]), false);
    rec.tables.insert(rec.tables.begin(), std::move(st));
  }
  rec.tables.insert(rec.tables.begin(), std::move(agg));
  rec.tables.insert(rec.tables.begin(), std::move(raw));
  return rec;
}

// ---------------------------------------------------------------------------
// Cluster scaling

double cluster_four_term_norm(const Grid& grid, const PotentialField& v, const SiteBox& part1, const SiteBox& part2,
                              double t, const SpectralLimits& limits) {
  const SpectralFunction e = SpectralFunction::exponential(t);
  auto semigroup = [&](const PotentialField& p) { return apply_function(assemble_hamiltonian(grid, p).matrix, e, limits); };
  const Eigen::MatrixXd m = semigroup(v) - semigroup(apply_sharp_cutoff(grid, v, part1)) -
                            semigroup(apply_sharp_cutoff(grid, v, part2)) + semigroup(zero_potential(grid));
  return trace_norm(m, limits);
}

namespace {

struct AdditivityRun {
  std::vector<double> lambdas;
  std::vector<long> xi12, xi1, xi2;
};

AdditivityRun additivity_instance(const ExperimentConfig& c, std::size_t instance) {
  const int n = static_cast<int>(c.param("additivity_sites"));
  const double h = c.grid.spacing;
  const Grid grid = build_grid(1, h, {n});
  const AnchorLattice anchors = centred_anchors(grid);
  const SingleSiteProfile profile = make_profile(c.profile, 1, h);
  // own realization stream, disjoint from the 2D campaign
  const CouplingField alpha = sample_couplings(c.distribution, covering_window(grid, anchors), c.seed, (1ULL << 31) + instance);
  const SiteBox b1 = SiteBox::make(grid, {n / 8, 0, 0}, {3 * n / 8 - 1, 0, 0});
  const SiteBox b2 = SiteBox::make(grid, {5 * n / 8, 0, 0}, {7 * n / 8 - 1, 0, 0});
  const PotentialField v1 = assemble_potential(grid, profile, alpha, anchors, Cutoff::lattice_sum(b1));
  const PotentialField v2 = assemble_potential(grid, profile, alpha, anchors, Cutoff::lattice_sum(b2));
  PotentialField v12 = v1;
  for (std::size_t i = 0; i < v12.values.size(); ++i) {
    if (v1.values[i] != 0.0 && v2.values[i] != 0.0) throw std::invalid_argument("cluster: supports of V1 and V2 overlap");
    v12.values[i] += v2.values[i];
  }
  const Hamiltonian h0 = free_hamiltonian(grid), h1 = assemble_hamiltonian(grid, v1), h2 = assemble_hamiltonian(grid, v2),
                    h12 = assemble_hamiltonian(grid, v12);
  double lo = INFINITY, hi = -INFINITY;
  const SymmetricBandMatrix* ops[] = {&h0.matrix, &h1.matrix, &h2.matrix, &h12.matrix};
  for (const auto* op : ops) {
    const auto [a, b] = op->gershgorin();
    lo = std::min(lo, a);
    hi = std::max(hi, b);
  }
  const EnergyGrid eg = off_spectrum_grid(lo - 0.25, hi + 0.25, static_cast<std::size_t>(c.param("additivity_energies")), ops);
  AdditivityRun out;
  out.lambdas = eg.lambdas;
  out.xi12 = ssf_counting(h12.matrix, h0.matrix, eg.lambdas).xi;
  out.xi1 = ssf_counting(h1.matrix, h0.matrix, eg.lambdas).xi;
  out.xi2 = ssf_counting(h2.matrix, h0.matrix, eg.lambdas).xi;
  return out;
}

}  // namespace

ResultRecord run_cluster(const ExperimentConfig& c, const Executor& ex) {
  ResultRecord rec = start_record(c);
  const double h = c.grid.spacing;
  const int depth = c.grid.transverse;
  const SpectralLimits limits = limits_from(c);
  const SingleSiteProfile profile = make_profile(c.profile, 2, h);
  const std::size_t nl = c.schedule.size(), nt = c.times.size();

  const auto norms = ex.map<std::vector<double>>(nl * c.realizations, [&](std::size_t idx) {
    const std::size_t i = idx % nl, r = idx / nl;
    const int w = c.schedule[i];
    const Grid grid = build_grid(2, h, {w, depth});
    const SiteBox lower = SiteBox::make(grid, {0, 0, 0}, {w - 1, depth / 2 - 1, 0});
    const SiteBox upper = SiteBox::make(grid, {0, depth / 2, 0}, {w - 1, depth - 1, 0});
    const AnchorLattice anchors = centred_anchors(grid);
    const PotentialField v = assemble_potential(grid, profile, draw(c, grid, anchors, r), anchors, Cutoff::none());
    // one eigendecomposition per operator, reused for every t
    const SpectrumOracle o = eig_all(assemble_hamiltonian(grid, v).matrix, true, limits);
    const SpectrumOracle o1 = eig_all(assemble_hamiltonian(grid, apply_sharp_cutoff(grid, v, lower)).matrix, true, limits);
    const SpectrumOracle o2 = eig_all(assemble_hamiltonian(grid, apply_sharp_cutoff(grid, v, upper)).matrix, true, limits);
    const SpectrumOracle o0 = eig_all(free_hamiltonian(grid).matrix, true, limits);
    std::vector<double> out;
    for (double t : c.times) {
      const SpectralFunction e = SpectralFunction::exponential(t);
      const Eigen::MatrixXd m = apply_function(o, e) - apply_function(o1, e) - apply_function(o2, e) + apply_function(o0, e);
      out.push_back(trace_norm(m, limits));
    }
    return out;
  });

  Table raw{"raw", {"interface_length", "realization", "t", "trace_norm"}, {}};
  Table agg{"aggregate", {"interface_length", "t", "mean_trace_norm", "variance"}, {}};
  std::vector<std::vector<double>> means(nt);
  std::vector<double> x;
  for (std::size_t i = 0; i < nl; ++i) {
    x.push_back(c.schedule[i] * h);
    for (std::size_t k = 0; k < nt; ++k) {
      std::vector<double> v(c.realizations);
      for (std::size_t r = 0; r < c.realizations; ++r) {
        v[r] = norms[r * nl + i][k];
        raw.add({D(x.back()), I(static_cast<long long>(r)), D(c.times[k]), D(v[r])});
      }
      const SampleStats st = sample_stats(v);
      agg.add({D(x.back()), D(c.times[k]), D(st.mean), D(st.variance)});
      means[k].push_back(st.mean);
    }
  }
  record_fit(rec, tagged("four-term norm", "t", c.times.front()), x, means.front(), c.tolerance("slope_low"),
             c.tolerance("slope_high"), "interface length", "trace norm");
  for (std::size_t k = 1; k < nt; ++k) {
    Series s{tagged("four-term norm", "t", c.times[k]), "interface length", "trace norm", {}};
    for (std::size_t i = 0; i < nl; ++i) s.points.emplace_back(x[i], means[k][i]);
    rec.series.push_back(s);
  }
  if (nt > 1) {
    bool decays = true;
    for (std::size_t k = 1; k < nt; ++k)
      if (!(means[k].back() < means[k - 1].back())) decays = false;
    rec.check("decay in t", decays, means.back().back(), means.front().back(),
              "largest box, norm at the last vs the first t", false);
  }

  // 1D additivity deficit.
  const auto instances = static_cast<std::size_t>(c.param("additivity_instances"));
  Table add{"additivity", {"instance", "lambda", "xi12", "xi1", "xi2", "deficit"}, {}};
  double worst = 0.0;
  if (instances > 0) {
    const auto runs = ex.map<AdditivityRun>(instances, [&](std::size_t j) { return additivity_instance(c, j); });
    for (std::size_t j = 0; j < instances; ++j)
      for (std::size_t k = 0; k < runs[j].lambdas.size(); ++k) {
        const long deficit = runs[j].xi12[k] - runs[j].xi1[k] - runs[j].xi2[k];
        worst = std::max(worst, static_cast<double>(std::labs(deficit)));
        add.add({I(static_cast<long long>(j)), D(runs[j].lambdas[k]), I(runs[j].xi12[k]), I(runs[j].xi1[k]),
                 I(runs[j].xi2[k]), I(deficit)});
      }
    rec.values["additivity_max_deficit"] = worst;
    rec.check("additivity deficit", worst <= c.tolerance("additivity_bound"), worst, c.tolerance("additivity_bound"),
              "max over instances and energies of |xi12 - xi1 - xi2|", false);
  }
  rec.tables.push_back(std::move(raw));
  rec.tables.push_back(std::move(agg));
  rec.tables.push_back(std::move(add));
  return rec;
}

// ---------------------------------------------------------------------------
// Sub/superadditive bracket

ResultRecord run_subadditive(const ExperimentConfig& c, const Executor& ex) {
  ResultRecord rec = start_record(c);
  const double h = c.grid.spacing;
  const int m = c.grid.margin;
  const double t = c.times.front();
  const SingleSiteProfile profile = make_profile(c.profile, 2, h);
  const std::size_t nl = c.schedule.size();

  std::vector<Grid> grids;
  for (int L : c.schedule) grids.push_back(cube_grid(2, h, L + 2 * m));
  const auto free_trace = ex.map<double>(nl, [&](std::size_t i) {
    return heat_trace(eig_all(free_hamiltonian(grids[i]).matrix).values, t);
  });

  // F for the box and the two halves of each split: [box, x-lower, x-upper, y-lower, y-upper]
  const auto values = ex.map<std::vector<double>>(nl * c.realizations, [&](std::size_t idx) {
    const std::size_t i = idx % nl, r = idx / nl;
    const Grid& grid = grids[i];
    const SiteBox box = centred_box(grid, c.schedule[i]);
    const AnchorLattice anchors = centred_anchors(grid);
    const CouplingField alpha = draw(c, grid, anchors, r);
    const SiteBox parts[] = {box, half_box(box, 0, false), half_box(box, 0, true), half_box(box, 1, false),
                             half_box(box, 1, true)};
    std::vector<double> out;
    for (const SiteBox& b : parts) {
      const Hamiltonian hb = assemble_hamiltonian(grid, assemble_potential(grid, profile, alpha, anchors, Cutoff::lattice_sum(b)));
      out.push_back(heat_trace(eig_all(hb.matrix).values, t) - free_trace[i]);
    }
    return out;
  });

  Table raw{"raw", {"L", "realization", "split_axis", "F_box", "F_part1", "F_part2", "deficit", "interface", "surface_box",
                    "surface_part1", "surface_part2"},
            {}};
  struct Split {
    std::size_t box_index;
    double f, f1, f2, s12, sb, s1, s2;
  };
  std::vector<Split> splits;
  for (std::size_t i = 0; i < nl; ++i)
    for (std::size_t r = 0; r < c.realizations; ++r) {
      const auto& v = values[r * nl + i];
      const SiteBox box = centred_box(grids[i], c.schedule[i]);
      for (int axis = 0; axis < 2; ++axis) {
        const SiteBox p1 = half_box(box, axis, false), p2 = half_box(box, axis, true);
        Split s{i, v[0], v[1 + 2 * axis], v[2 + 2 * axis], c.schedule[i] * h, box.surface_measure(h), p1.surface_measure(h),
                p2.surface_measure(h)};
        splits.push_back(s);
        raw.add({I(c.schedule[i]), I(static_cast<long long>(r)), I(axis), D(s.f), D(s.f1), D(s.f2), D(s.f - s.f1 - s.f2),
                 D(s.s12), D(s.sb), D(s.s1), D(s.s2)});
      }
    }

  const double safety = c.tolerance("safety_factor");
  auto calibrate = [&](std::size_t below) {
    double worst = 0.0;
    for (const auto& s : splits)
      if (s.box_index < below) worst = std::max(worst, std::abs(s.f - s.f1 - s.f2) / s.s12);
    return safety * worst;
  };
  auto bracket_holds = [](const Split& s, double C) {
    const double fp = s.f + 0.5 * C * s.sb, fp1 = s.f1 + 0.5 * C * s.s1, fp2 = s.f2 + 0.5 * C * s.s2;
    const double fm = s.f - 0.5 * C * s.sb, fm1 = s.f1 - 0.5 * C * s.s1, fm2 = s.f2 - 0.5 * C * s.s2;
    // allow rounding of the traces themselves
    const double slack = 1e-9 * (std::abs(s.f) + std::abs(s.f1) + std::abs(s.f2) + 1.0);
    return fp <= fp1 + fp2 + slack && fm >= fm1 + fm2 - slack;
  };

  const double C = calibrate(nl);
  rec.values["C"] = C;
  rec.values["safety_factor"] = safety;
  if (!std::isfinite(C)) {
    rec.check("calibration", false, C, 0.0, "no finite constant fits the observed splits");
  } else {
    std::size_t failures = 0;
    for (const auto& s : splits)
      if (!bracket_holds(s, C)) ++failures;
    rec.check("bracket with calibrated C", failures == 0, static_cast<double>(failures), 0.0,
              "calibration set: all " + std::to_string(splits.size()) + " splits, C = " + num(C));
  }
  if (nl > 1) {
    const double held = calibrate(nl - 1);
    std::size_t failures = 0, tested = 0;
    for (const auto& s : splits)
      if (s.box_index == nl - 1) {
        ++tested;
        if (!bracket_holds(s, held)) ++failures;
      }
    rec.values["C_held_out"] = held;
    rec.check("bracket at the largest box with C from smaller boxes", failures == 0, static_cast<double>(failures), 0.0,
              std::to_string(tested) + " splits tested, C = " + num(held), false);
  }

  Table agg{"aggregate", {"L", "mean_F_per_volume", "variance"}, {}};
  Series s{"F per volume", "L", "F/meas", {}};
  std::vector<double> means, vars;
  for (std::size_t i = 0; i < nl; ++i) {
    const double meas = centred_box(grids[i], c.schedule[i]).volume(h);
    std::vector<double> v(c.realizations);
    for (std::size_t r = 0; r < c.realizations; ++r) v[r] = values[r * nl + i][0] / meas;
    const SampleStats st = sample_stats(v);
    agg.add({I(c.schedule[i]), D(st.mean), D(st.variance)});
    s.points.emplace_back(c.schedule[i], st.mean);
    means.push_back(st.mean);
    vars.push_back(st.variance);
  }
  rec.series.push_back(s);
  for (std::size_t i = 2; i < nl; ++i) {
    const double a = std::abs(means[i] - means[i - 1]), b = std::abs(means[i - 1] - means[i - 2]);
    rec.check("Cauchy trend at L=" + std::to_string(c.schedule[i]), a < b || (a == 0.0 && b == 0.0), a, b,
              "|f(L_k) - f(L_k-1)| vs |f(L_k-1) - f(L_k-2)|");
  }
  bool var_ok = true;
  for (std::size_t i = 1; i < nl; ++i)
    if (vars[i] > c.tolerance("variance_slack") * vars[i - 1]) var_ok = false;
  rec.check("variance decay", var_ok, vars.back(), vars.front(), "across-realization variance of F/meas", false);

  rec.tables.push_back(std::move(raw));
  rec.tables.push_back(std::move(agg));
  return rec;
}

// ---------------------------------------------------------------------------
// Surface states

namespace {

struct StripSetup {
  Grid grid;
  AnchorLattice anchors;
  SiteBox box;
  double length = 0.0;
};

StripSetup strip(const ExperimentConfig& c, int length_sites, int transverse) {
  StripSetup s;
  const int m = c.grid.margin;
  s.grid = build_grid(2, c.grid.spacing, {length_sites + 2 * m, transverse});
  s.anchors.cell = 1;
  s.anchors.normal_axis = 1;
  s.anchors.origin = {s.grid.extent(0) / 2, transverse / 2, 0};
  s.box = SiteBox::make(s.grid, {m, 0, 0}, {m + length_sites - 1, transverse - 1, 0});
  s.length = length_sites * c.grid.spacing;
  return s;
}

}  // namespace

ResultRecord run_surface(const ExperimentConfig& c, const Executor& ex) {
  ResultRecord rec = start_record(c);
  const double h = c.grid.spacing;
  const SingleSiteProfile profile = make_profile(c.profile, 2, h);
  const std::size_t nl = c.schedule.size(), ne = c.energies.size();
  const auto split_r = std::min<std::size_t>(c.realizations, static_cast<std::size_t>(c.param("split_realizations")));
  const auto laplace_r = std::min<std::size_t>(c.realizations, static_cast<std::size_t>(c.param("laplace_realizations")));
  const auto transverse_r =
      std::min<std::size_t>(c.realizations, static_cast<std::size_t>(c.param("transverse_realizations")));
  const auto split_count = static_cast<std::size_t>(c.param("split_energies"));
  const double crit = c.param("criterion_energy");
  const std::size_t crit_k = static_cast<std::size_t>(std::find(c.energies.begin(), c.energies.end(), crit) - c.energies.begin());

  std::vector<StripSetup> strips;
  std::vector<Hamiltonian> frees;
  for (int L : c.schedule) {
    strips.push_back(strip(c, L, c.grid.transverse));
    frees.push_back(free_hamiltonian(strips.back().grid));
  }

  struct Cellv {
    std::vector<long> xi;
    // chain rule on the split grid: lambda, xi, xi_plus, xi_minus
    std::vector<std::array<double, 4>> split;
    bool signs_ok = true;
    std::vector<double> laplace;  // per t, per length
    long transverse_xi = 0;
    bool has_transverse = false;
  };
  const auto cells = ex.map<Cellv>(nl * c.realizations, [&](std::size_t idx) {
    const std::size_t i = idx % nl, r = idx / nl;
    const StripSetup& st = strips[i];
    const SymmetricBandMatrix& h0 = frees[i].matrix;
    const CouplingField alpha = draw(c, st.grid, st.anchors, r);
    const Hamiltonian hv =
        assemble_hamiltonian(st.grid, assemble_potential(st.grid, profile, alpha, st.anchors, Cutoff::lattice_sum(st.box)));
    Cellv out;
    out.xi = certified_xi(hv.matrix, h0, c.energies);

    if (r < split_r) {
      const auto [plus, minus] = split_signs(alpha);
      const PotentialField vp = assemble_potential(st.grid, profile, plus, st.anchors, Cutoff::lattice_sum(st.box));
      const PotentialField vm = assemble_potential(st.grid, profile, minus, st.anchors, Cutoff::lattice_sum(st.box));
      const Hamiltonian hm = assemble_hamiltonian(st.grid, vm);
      // one eigensolve per operator; in-band counts read off the spectra
      const std::vector<double> s0 = eig_all(h0).values, sm = eig_all(hm.matrix).values, sv = eig_all(hv.matrix).values;
      const std::vector<double>* spectra[] = {&s0, &sm, &sv};
      const double margin = std::max({spectral_margin(h0), spectral_margin(hm.matrix), spectral_margin(hv.matrix)});
      const double lo = std::min({s0.front(), sm.front(), sv.front()}) - 0.25;
      const double hi = std::max({s0.back(), sm.back(), sv.back()}) + 0.25;
      const EnergyGrid eg = off_spectrum_grid_sorted(lo, hi, split_count, spectra, margin);
      const auto xi = ssf_from_spectra(sv, s0, eg.lambdas);
      const auto xi_plus = ssf_from_spectra(sv, sm, eg.lambdas);
      const auto xi_minus = ssf_from_spectra(sm, s0, eg.lambdas);
      // sign of each piece follows the sign of the potential it adds
      const double vp_max = vp.max(), vp_min = vp.min(), vm_max = vm.max(), vm_min = vm.min();
      for (std::size_t k = 0; k < eg.lambdas.size(); ++k) {
        out.split.push_back({eg.lambdas[k], static_cast<double>(xi[k]), static_cast<double>(xi_plus[k]),
                             static_cast<double>(xi_minus[k])});
        if (vp_min >= 0.0 && xi_plus[k] < 0) out.signs_ok = false;
        if (vp_max <= 0.0 && xi_plus[k] > 0) out.signs_ok = false;
        if (vm_min >= 0.0 && xi_minus[k] < 0) out.signs_ok = false;
        if (vm_max <= 0.0 && xi_minus[k] > 0) out.signs_ok = false;
      }
    }
    if (r < laplace_r) {
      const auto ev = eig_all(hv.matrix).values;
      const auto e0 = eig_all(h0).values;
      for (double t : c.times) out.laplace.push_back(laplace_functional(ev, e0, t).trace_difference / st.length);
    }
    if (i + 1 == nl && r < transverse_r) {
      const StripSetup wide = strip(c, c.schedule[i], 2 * c.grid.transverse);
      const CouplingField wa = draw(c, wide.grid, wide.anchors, r);
      const Hamiltonian hw =
          assemble_hamiltonian(wide.grid, assemble_potential(wide.grid, profile, wa, wide.anchors, Cutoff::lattice_sum(wide.box)));
      const std::vector<double> one = {crit};
      out.transverse_xi = certified_xi(hw.matrix, free_hamiltonian(wide.grid).matrix, one)[0];
      out.has_transverse = true;
    }
    return out;
  });

  Table raw{"raw", {"length", "realization", "lambda", "xi_raw", "xi_per_length"}, {}};
  Table agg{"aggregate", {"length", "lambda", "mean_xi_per_length", "variance"}, {}};
  Table split{"chain_rule", {"length", "realization", "lambda", "xi", "xi_plus", "xi_minus", "residual"}, {}};
  Table lap{"laplace", {"length", "realization", "t", "F_per_length"}, {}};
  std::vector<std::vector<double>> means(ne);
  long chain_failures = 0;
  bool signs_ok = true;
  for (std::size_t i = 0; i < nl; ++i) {
    const double len = strips[i].length;
    for (std::size_t k = 0; k < ne; ++k) {
      std::vector<double> v(c.realizations);
      for (std::size_t r = 0; r < c.realizations; ++r) {
        v[r] = cells[r * nl + i].xi[k] / len;
        raw.add({I(c.schedule[i]), I(static_cast<long long>(r)), D(c.energies[k]), I(cells[r * nl + i].xi[k]), D(v[r])});
      }
      const SampleStats st = sample_stats(v);
      agg.add({I(c.schedule[i]), D(c.energies[k]), D(st.mean), D(st.variance)});
      means[k].push_back(st.mean);
    }
    for (std::size_t r = 0; r < c.realizations; ++r) {
      const Cellv& cell = cells[r * nl + i];
      if (!cell.signs_ok) signs_ok = false;
      for (const auto& row : cell.split) {
        const double residual = row[1] - row[2] - row[3];
        if (residual != 0.0) ++chain_failures;
        split.add({I(c.schedule[i]), I(static_cast<long long>(r)), D(row[0]), D(row[1]), D(row[2]), D(row[3]), D(residual)});
      }
      for (std::size_t k = 0; k < cell.laplace.size(); ++k)
        lap.add({I(c.schedule[i]), I(static_cast<long long>(r)), D(c.times[k]), D(cell.laplace[k])});
    }
  }
  for (std::size_t k = 0; k < ne; ++k) {
    Series s{tagged("xi per length", "lambda", c.energies[k]), "length", "mean xi/length", {}};
    for (std::size_t i = 0; i < nl; ++i) s.points.emplace_back(c.schedule[i], means[k][i]);
    rec.series.push_back(s);
  }

  rec.check("chain rule exact", chain_failures == 0, static_cast<double>(chain_failures), 0.0,
            std::to_string(split.rows.size()) + " (realization, lambda) pairs");
  rec.check("sign of split pieces", signs_ok, signs_ok ? 0.0 : 1.0, 0.0, "monotonicity of each piece");
  if (nl > 1) {
    const double a = means[crit_k][nl - 1], b = means[crit_k][nl - 2];
    const double rel = a != 0.0 ? std::abs(a - b) / std::abs(a) : (b == 0.0 ? 0.0 : INFINITY);
    rec.check(tagged("relative change", "lambda", crit), rel <= c.tolerance("relative_change"), rel,
              c.tolerance("relative_change"),
              "between lengths " + std::to_string(c.schedule[nl - 2]) + " and " + std::to_string(c.schedule[nl - 1]));
  }
  if (transverse_r > 0) {
    std::vector<double> narrow, wide;
    for (std::size_t r = 0; r < transverse_r; ++r) {
      const Cellv& cell = cells[r * nl + nl - 1];
      narrow.push_back(cell.xi[crit_k] / strips.back().length);
      wide.push_back(cell.transverse_xi / strips.back().length);
    }
    const double a = sample_stats(narrow).mean, b = sample_stats(wide).mean;
    const double shift = std::abs(a - b) / std::max(std::abs(a), 1e-300);
    rec.check("transverse doubling", shift <= c.tolerance("transverse_shift") || a == b, shift,
              c.tolerance("transverse_shift"), std::to_string(transverse_r) + " realizations with doubled transverse extent");
  }
  rec.tables.push_back(std::move(raw));
  rec.tables.push_back(std::move(agg));
  rec.tables.push_back(std::move(split));
  rec.tables.push_back(std::move(lap));
  return rec;
}

// ---------------------------------------------------------------------------
// Kirsch demonstration

ResultRecord run_kirsch_demo(const ExperimentConfig& c, const Executor& ex) {
  ResultRecord rec = start_record(c);
  const double h = c.grid.spacing;
  const std::size_t nl = c.schedule.size(), nt = c.times.size();
  const SingleSiteProfile profile = make_profile(c.profile, 2, h);

  std::vector<Grid> grids;
  std::vector<Hamiltonian> free_ops, ops;
  for (int L : c.schedule) {
    const Grid grid = cube_grid(2, h, L);
    // single anchor with coupling 1, placing the cell at the centre
    AnchorLattice a;
    a.origin = {(L - c.profile.width) / 2, (L - c.profile.width) / 2, 0};
    const LatticeWindow w = LatticeWindow::make(2, {0, 0, 0}, {0, 0, 0});
    const PotentialField v = assemble_potential(grid, profile, constant_field(w, 1.0), a, Cutoff::none());
    grids.push_back(grid);
    free_ops.push_back(free_hamiltonian(grid));
    ops.push_back(assemble_hamiltonian(grid, v));
  }
  std::vector<std::vector<double>> spectra(2 * nl);
  ex.for_each_index(2 * nl, [&](std::size_t j) {
    spectra[j] = eig_all(j % 2 == 0 ? free_ops[j / 2].matrix : ops[j / 2].matrix).values;
  });
  std::vector<const std::vector<double>*> all;
  double margin = 0.0;
  for (std::size_t j = 0; j < 2 * nl; ++j) {
    all.push_back(&spectra[j]);
    margin = std::max(margin, spectral_margin(j % 2 == 0 ? free_ops[j / 2].matrix : ops[j / 2].matrix));
  }
  const EnergyGrid eg = off_spectrum_grid_sorted(c.param("energy_low"), c.param("energy_high"),
                                                 static_cast<std::size_t>(c.param("energy_count")), all, margin);

  struct Run {
    std::vector<long> phi;
    std::vector<LaplaceResult> psi;
  };
  const auto runs = ex.map<Run>(nl, [&](std::size_t i) {
    Run out;
    const auto& e0 = spectra[2 * i];
    const auto& ev = spectra[2 * i + 1];
    out.phi = ssf_from_spectra(ev, e0, eg.lambdas);
    for (double t : c.times) out.psi.push_back(laplace_functional(ev, e0, t));
    return out;
  });

  Table phi{"phi", {"L", "lambda", "phi"}, {}};
  Table psi{"psi", {"L", "t", "psi_trace", "psi_step", "relative_difference"}, {}};
  bool nonnegative = true;
  double worst_rel = 0.0;
  for (std::size_t i = 0; i < nl; ++i) {
    Series s{"phi L=" + std::to_string(c.schedule[i]), "lambda", "phi", {}};
    for (std::size_t k = 0; k < eg.lambdas.size(); ++k) {
      phi.add({I(c.schedule[i]), D(eg.lambdas[k]), I(runs[i].phi[k])});
      s.points.emplace_back(eg.lambdas[k], runs[i].phi[k]);
      if (runs[i].phi[k] < 0) nonnegative = false;
    }
    rec.series.push_back(s);
    for (std::size_t k = 0; k < nt; ++k) {
      // Psi = tr(exp(-tH0) - exp(-tH)) = -F
      const LaplaceResult& lr = runs[i].psi[k];
      psi.add({I(c.schedule[i]), D(c.times[k]), D(-lr.trace_difference), D(-lr.step_integral), D(lr.relative_difference)});
      worst_rel = std::max(worst_rel, lr.relative_difference);
    }
  }
  for (std::size_t k = 0; k < nt; ++k) {
    Series s{tagged("psi", "t", c.times[k]), "L", "psi", {}};
    for (std::size_t i = 0; i < nl; ++i) s.points.emplace_back(c.schedule[i], -runs[i].psi[k].trace_difference);
    rec.series.push_back(s);
  }

  rec.check("phi nonnegative", nonnegative, nonnegative ? 0.0 : 1.0, 0.0, "V >= 0 monotonicity", false);
  rec.check("psi dual evaluation", worst_rel <= c.tolerance("dual_relative"), worst_rel, c.tolerance("dual_relative"),
            "trace difference vs step integral, all L and t", false);

  // growth of phi between the smallest and the largest box
  double best = -INFINITY, best_lambda = 0.0;
  for (std::size_t k = 0; k < eg.lambdas.size(); ++k) {
    const double g = static_cast<double>(runs.back().phi[k] - runs.front().phi[k]);
    if (g > best) {
      best = g;
      best_lambda = eg.lambdas[k];
    }
  }
  rec.values["phi_growth"] = best;
  rec.values["phi_growth_lambda"] = best_lambda;
  const bool grows = best >= c.tolerance("growth");
  rec.check("phi growth", grows, best, c.tolerance("growth"),
            "max over lambda of phi_Lmax - phi_Lmin, attained at lambda=" + num(best_lambda), false);
  if (!grows)
    rec.warnings.push_back("kirsch: phi growth " + num(best) + " below " + num(c.tolerance("growth")) +
                           " on this grid; data in table phi");

  // range of Psi at the reference t (1 when present)
  std::size_t tk = 0;
  for (std::size_t k = 0; k < nt; ++k)
    if (c.times[k] == 1.0) tk = k;
  auto range = [&](std::size_t from) {
    double lo = INFINITY, hi = -INFINITY;
    for (std::size_t i = from; i < nl; ++i) {
      lo = std::min(lo, -runs[i].psi[tk].trace_difference);
      hi = std::max(hi, -runs[i].psi[tk].trace_difference);
    }
    return hi - lo;
  };
  if (nl >= 3) {
    const double tail = range(nl - 2), whole = range(0);
    rec.values["psi_range_tail"] = tail;
    rec.values["psi_range_all"] = whole;
    rec.check("psi range trend", tail <= whole, tail, whole, "range over the two largest boxes vs over all boxes", false);
  }
  rec.tables.push_back(std::move(phi));
  rec.tables.push_back(std::move(psi));
  return rec;
}

// ---------------------------------------------------------------------------
// Resolvent powers

ResultRecord run_resolvent_power(const ExperimentConfig& c, const Executor& ex) {
  ResultRecord rec = start_record(c);
  const double h = c.grid.spacing;
  const int depth = c.grid.transverse;
  const int power = static_cast<int>(c.param("power"));
  const SpectralLimits limits = limits_from(c);
  const SingleSiteProfile profile = make_profile(c.profile, 2, h);
  const std::size_t nl = c.schedule.size(), ne = c.energies.size();
  const double gap = c.tolerance("spectral_gap");

  const auto norms = ex.map<std::vector<double>>(nl * c.realizations, [&](std::size_t idx) {
    const std::size_t i = idx % nl, r = idx / nl;
    const int w = c.schedule[i];
    const Grid grid = build_grid(2, h, {w, depth});
    const SiteBox b = SiteBox::make(grid, {0, 0, 0}, {w - 1, depth / 2 - 1, 0});
    const AnchorLattice anchors = centred_anchors(grid);
    const Hamiltonian hv =
        assemble_hamiltonian(grid, assemble_potential(grid, profile, draw(c, grid, anchors, r), anchors, Cutoff::none()));
    const Hamiltonian hb = dirichlet_decoupling(hv, b);
    const SpectrumOracle o = eig_all(hv.matrix, true, limits);
    const SpectrumOracle ob = eig_all(hb.matrix, true, limits);
    std::vector<double> out;
    for (double e : c.energies) {
      const double bottom = std::min(o.values.front(), ob.values.front());
      if (!(e > -bottom + gap)) {
        std::ostringstream os;
        os << "resolvent: E = " << e << " is within " << gap << " of the spectrum (bottom " << bottom << ")";
        throw std::domain_error(os.str());
      }
      const SpectralFunction g = SpectralFunction::resolvent_power(e, power);
      out.push_back(trace_norm(apply_function(o, g) - apply_function(ob, g), limits));
    }
    return out;
  });

  Table raw{"raw", {"interface_length", "realization", "E", "trace_norm"}, {}};
  Table agg{"aggregate", {"interface_length", "E", "mean_trace_norm", "variance"}, {}};
  std::vector<std::vector<double>> means(ne);
  std::vector<double> x;
  for (std::size_t i = 0; i < nl; ++i) {
    x.push_back(c.schedule[i] * h);
    for (std::size_t k = 0; k < ne; ++k) {
      std::vector<double> v(c.realizations);
      for (std::size_t r = 0; r < c.realizations; ++r) {
        v[r] = norms[r * nl + i][k];
        raw.add({D(x.back()), I(static_cast<long long>(r)), D(c.energies[k]), D(v[r])});
      }
      const SampleStats st = sample_stats(v);
      agg.add({D(x.back()), D(c.energies[k]), D(st.mean), D(st.variance)});
      means[k].push_back(st.mean);
    }
  }
  record_fit(rec, tagged("resolvent difference", "E", c.energies.front()), x, means.front(), c.tolerance("slope_low"),
             c.tolerance("slope_high"), "interface length", "trace norm");
  for (std::size_t k = 1; k < ne; ++k) {
    Series s{tagged("resolvent difference", "E", c.energies[k]), "interface length", "trace norm", {}};
    for (std::size_t i = 0; i < nl; ++i) s.points.emplace_back(x[i], means[k][i]);
    rec.series.push_back(s);
  }
  bool mono = true;
  for (std::size_t i = 0; i < nl; ++i)
    for (std::size_t k = 1; k < ne; ++k)
      if (!(means[k][i] < means[k - 1][i])) mono = false;
  rec.check("decreasing in E", mono, means.back().back(), means.front().back(), "every interface length");
  rec.tables.push_back(std::move(raw));
  rec.tables.push_back(std::move(agg));
  return rec;
}

// ---------------------------------------------------------------------------
// Brownian bounds

ResultRecord run_brownian(const ExperimentConfig& c, const Executor& ex) {
  ResultRecord rec = start_record(c);
  const double sigma = c.tolerance("sigma");
  const auto paths = static_cast<std::size_t>(c.param("paths"));
  const auto steps = c.param("steps");

  struct Job {
    int nu;
    double d, t;
  };
  std::vector<Job> jobs;
  for (int nu = 1; nu <= 2; ++nu)
    for (double d : c.distances)
      for (double t : c.times) jobs.push_back({nu, d, t});

  Table raw{"raw", {"nu", "distance", "t", "estimate", "standard_error", "plain_estimate", "bound", "exact"}, {}};
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    const Job& job = jobs[j];
    HittingOptions opt;
    opt.paths = paths;
    opt.dt = job.t / steps;
    opt.bridge = true;
    opt.seed = splitmix64(c.seed + j);
    opt.workers = ex.workers();
    const Point x(job.nu, 0.0);
    const RegionSpec region(job.nu, HalfSpace{0, job.d, true});
    const HittingEstimate est = simulate_hitting(x, region, job.t, opt);
    const double bound = gaussian_bound(x, region, job.t);
    // a half-space is hit exactly when the first coordinate is
    const double exact = std::erfc(job.d / (2.0 * std::sqrt(job.t)));
    raw.add({I(job.nu), D(job.d), D(job.t), D(est.estimate), D(est.standard_error), D(est.plain_estimate), D(bound), D(exact)});
    const std::string tag = "nu=" + std::to_string(job.nu) + ",d=" + num(job.d) + ",t=" + num(job.t);
    const double upper = est.estimate + sigma * est.standard_error;
    rec.check("gaussian bound(" + tag + ")", upper <= bound, upper, bound);
    const double dev = std::abs(est.estimate - exact);
    rec.check("erfc agreement(" + tag + ")", dev <= sigma * est.standard_error, dev, sigma * est.standard_error,
              "exact " + num(exact), job.nu == 1);
    rec.check("bridge dominates endpoint(" + tag + ")", est.estimate >= est.plain_estimate, est.estimate,
              est.plain_estimate);
  }

  // joint bound with a 2D box
  const Box box{{-1.0, -1.0}, {1.0, 1.0}};
  Table joint{"joint_bound", {"x0", "x1", "t", "inside", "distance", "lhs", "lhs_stderr", "exit_probability", "envelope", "rhs",
                              "holds"},
              {}};
  const std::vector<Point> starts = {{0.0, 0.0}, {1.5, 0.0}, {2.5, 0.5}};
  std::size_t tag = 1000;
  for (const Point& x : starts)
    for (double t : c.times) {
      HittingOptions opt;
      opt.paths = static_cast<std::size_t>(c.param("joint_paths"));
      opt.dt = t / steps;
      opt.seed = splitmix64(c.seed + tag++);
      opt.workers = ex.workers();
      const JointBoundRecord jr = joint_bound_check(x, box, t, opt, c.param("joint_eps"));
      joint.add({D(x[0]), D(x[1]), D(t), I(jr.inside), D(jr.distance), D(jr.lhs), D(jr.lhs_stderr), D(jr.exit_probability),
                 D(jr.envelope), D(jr.rhs), I(jr.holds)});
      rec.check("joint bound(x=" + num(x[0]) + "," + num(x[1]) + ",t=" + num(t) + ")", jr.holds, jr.lhs, jr.rhs);
    }

  // boundary overlap per unit surface
  Table overlap{"boundary_overlap", {"L", "overlap_per_volume"}, {}};
  std::vector<double> ls = {2.0, 4.0, 8.0, 16.0}, ov;
  for (double L : ls) {
    ov.push_back(boundary_overlap(OverlapProfile::exponential(2.0), L, 2));
    overlap.add({D(L), D(ov.back())});
  }
  const LinearFit fit = fit_loglog(ls, ov);
  rec.fits.push_back({"boundary overlap", fit, -1.3, -0.7});
  Series s{"boundary overlap", "L", "overlap/meas", {}};
  for (std::size_t i = 0; i < ls.size(); ++i) s.points.emplace_back(ls[i], ov[i]);
  rec.series.push_back(s);
  rec.check("boundary overlap surface scaling", fit.slope >= -1.3 && fit.slope <= -0.7, fit.slope, -1.0,
            "log-log slope of the overlap per volume", false);

  rec.tables.push_back(std::move(raw));
  rec.tables.push_back(std::move(joint));
  rec.tables.push_back(std::move(overlap));
  return rec;
}

}  // namespace ssflab
