// Acceptance criteria: one PASS/FAIL line per criterion. Values are recomputed from the
// raw tables of each campaign where possible; tolerances are pinned here.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "ssflab/experiments.hpp"
#include "ssflab/harness.hpp"
#include "ssflab/ssf.hpp"

using namespace ssflab;

namespace {

struct Verdict {
  bool ok = false;
  std::string detail;
};

double num(const Cell& c) {
  if (const auto* i = std::get_if<long long>(&c)) return static_cast<double>(*i);
  return std::get<double>(c);
}

const Table& table(const ResultRecord& r, const std::string& name) {
  const Table* t = r.find_table(name);
  if (!t) throw std::runtime_error(r.experiment + ": missing table " + name);
  return *t;
}

// rows of `t` grouped by the value of column `key`, collecting column `value`
std::map<double, std::vector<double>> group(const Table& t, const std::string& key, const std::string& value,
                                            const std::function<bool(const std::vector<Cell>&)>& keep = nullptr) {
  const std::size_t k = t.column(key), v = t.column(value);
  std::map<double, std::vector<double>> out;
  for (const auto& row : t.rows)
    if (!keep || keep(row)) out[num(row[k])].push_back(num(row[v]));
  return out;
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double variance(const std::vector<double>& v) {
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

double mean_abs(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += std::abs(x);
  return s / static_cast<double>(v.size());
}

// least-squares slope of log y against log x
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += std::log(x[i]) / n;
    my += std::log(std::abs(y[i])) / n;
  }
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(std::abs(y[i])) - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

std::vector<double> dense_eigenvalues(const SymmetricBandMatrix& m) {
  const Eigen::VectorXd ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(m.to_dense(), Eigen::EigenvaluesOnly).eigenvalues();
  std::vector<double> out(ev.data(), ev.data() + ev.size());
  std::sort(out.begin(), out.end());
  return out;
}

long count_strictly_below(const std::vector<double>& ev, double l) {
  return std::count_if(ev.begin(), ev.end(), [l](double e) { return e < l; });
}

// int g' xi with xi = N(H0) - N(H) constant between consecutive points of both spectra
double oracle_step_integral(const std::vector<double>& eh, const std::vector<double>& eh0,
                            const std::function<double(double)>& g) {
  std::vector<double> pts = eh;
  pts.insert(pts.end(), eh0.begin(), eh0.end());
  std::sort(pts.begin(), pts.end());
  double s = 0.0;
  for (std::size_t k = 0; k + 1 < pts.size(); ++k) {
    if (!(pts[k + 1] > pts[k])) continue;
    const double mid = 0.5 * (pts[k] + pts[k + 1]);
    const long xi = count_strictly_below(eh0, mid) - count_strictly_below(eh, mid);
    s += static_cast<double>(xi) * (g(pts[k + 1]) - g(pts[k]));
  }
  return s;
}

Hamiltonian alloy_1d(int n, std::uint64_t seed) {
  const Grid g = build_grid(1, 1.0, {n});
  const AnchorLattice anchors{};
  const auto c = sample_couplings(DistributionSpec(Bernoulli{0.5, 0.0, 1.0}), covering_window(g, anchors), seed, 0);
  return assemble_hamiltonian(g, assemble_potential(g, SingleSiteProfile::point(1, -1.0), c, anchors, Cutoff::none()));
}

// ---------------------------------------------------------------------------

Verdict counting_oracle() {
  std::mt19937_64 rng(20240601);
  std::uniform_int_distribution<int> size(1, 200);
  std::uniform_real_distribution<double> entry(-1.0, 1.0), unit(0.0, 1.0);
  const int bands[] = {0, 1, 2, 4, 9, 16, 40};
  long checked = 0, mismatches = 0;
  for (int m = 0; m < 200; ++m) {
    const int n = size(rng);
    const std::size_t kd = std::min<std::size_t>(bands[m % 7], n - 1);
    SymmetricBandMatrix a(n, kd);
    for (int i = 0; i < n; ++i)
      for (int j = i; j <= std::min<int>(n - 1, i + static_cast<int>(kd)); ++j) a.set(i, j, (i == j ? 4.0 : 1.0) * entry(rng));
    const auto ev = dense_eigenvalues(a);
    const double scale = std::max(1.0, std::max(std::abs(ev.front()), std::abs(ev.back())));
    int probes = 0;
    while (probes < 20) {
      const double l = ev.front() - 0.5 + (ev.back() - ev.front() + 1.0) * unit(rng);
      const double gap = std::abs(*std::min_element(ev.begin(), ev.end(), [l](double x, double y) {
        return std::abs(x - l) < std::abs(y - l);
      }) - l);
      if (gap < 1e-6 * scale) continue;
      ++probes;
      ++checked;
      if (count_below(a, l) != count_strictly_below(ev, l)) ++mismatches;
    }
  }
  return {mismatches == 0 && checked == 4000,
          std::to_string(mismatches) + " mismatches in " + std::to_string(checked) + " counts over 200 matrices"};
}

Verdict birman_krein() {
  const int n = 400;
  const auto h = alloy_1d(n, 4);
  const auto h0 = free_hamiltonian(h.grid);
  const auto eh = dense_eigenvalues(h.matrix), eh0 = dense_eigenvalues(h0.matrix);
  const std::pair<double, double> supports[] = {{-1.5, 0.0}, {-1.0, 1.0}, {0.0, 2.0}, {1.0, 3.5}, {2.5, 4.5}};
  double worst = 0.0;
  bool ok = true;
  for (const auto& [a, b] : supports) {
    const SpectralFunction g = SpectralFunction::bump(a, b);
    const auto r = birman_krein_residual(h.matrix, h0.matrix, g);
    const double tol = 1e-8 * n * g.max_abs_derivative();
    double trace = 0.0;
    for (std::size_t i = 0; i < eh.size(); ++i) trace += g.value(eh[i]) - g.value(eh0[i]);
    const double independent = trace - oracle_step_integral(eh, eh0, [&](double x) { return g.value(x); });
    ok = ok && std::abs(r.residual) <= tol && std::abs(independent) <= tol && std::abs(r.trace_difference - trace) <= tol;
    worst = std::max({worst, std::abs(r.residual) / tol, std::abs(independent) / tol});
  }
  char buf[96];
  std::snprintf(buf, sizeof buf, "worst |residual|/tolerance %.3g with tolerance 1e-8*n*max|g'|, 5 bumps, n=400", worst);
  return {ok, buf};
}

Verdict laplace_identity() {
  const auto h = alloy_1d(300, 8);
  const auto h0 = free_hamiltonian(h.grid);
  const auto eh = dense_eigenvalues(h.matrix), eh0 = dense_eigenvalues(h0.matrix);
  double worst = 0.0;
  for (double t : {0.5, 1.0, 2.0}) {
    const auto r = laplace_functional(h.matrix, h0.matrix, t);
    double trace = 0.0;
    for (std::size_t i = 0; i < eh.size(); ++i) trace += std::exp(-t * eh[i]) - std::exp(-t * eh0[i]);
    const double step = oracle_step_integral(eh, eh0, [t](double x) { return std::exp(-t * x); });
    worst = std::max({worst, r.relative_difference, std::abs(trace - step) / std::abs(trace),
                      std::abs(r.trace_difference - trace) / std::abs(trace)});
  }
  char buf[96];
  std::snprintf(buf, sizeof buf, "max relative difference %.3g (t = 0.5, 1, 2; n = 300)", worst);
  return {worst <= 1e-8, buf};
}

Verdict bulk(const ResultRecord& r, const ExperimentConfig& c) {
  const Table& raw = table(r, "raw");
  const auto xi = group(raw, "L", "xi_per_volume", [](const auto& row) { return num(row[2]) == -0.5; });
  const auto ref = group(raw, "L", "n_reference", [](const auto& row) { return num(row[2]) == -0.5; });
  const double n_ref = mean(ref.at(1024));
  const double dev = std::abs(mean(xi.at(1024)) + n_ref);
  const double v_small = variance(xi.at(128)), v_large = variance(xi.at(1024));
  char buf[160];
  std::snprintf(buf, sizeof buf, "|xi/meas + N| = %.3g at L=1024 over %zu realizations; var %.3g (L=1024) vs %.3g (L=128)",
                dev, xi.at(1024).size(), v_large, v_small);
  return {dev <= 0.02 && v_large < v_small && c.realizations >= 20, buf};
}

Verdict locality(const ResultRecord& r) {
  const Table& raw = table(r, "raw");
  const auto in = group(raw, "L", "inside_trace"), out = group(raw, "L", "outside_trace");
  std::vector<double> x, yi, yo;
  for (const auto& [L, v] : in) {
    x.push_back(L);
    yi.push_back(mean_abs(v));
    yo.push_back(mean_abs(out.at(L)));
  }
  const double si = loglog_slope(x, yi), so = loglog_slope(x, yo);
  char buf[128];
  std::snprintf(buf, sizeof buf, "slopes inside %.3f, outside %.3f (window [-1.3, -0.7], L = 8, 16, 32)", si, so);
  auto in_window = [](double s) { return s >= -1.3 && s <= -0.7; };
  return {in_window(si) && in_window(so) && x == std::vector<double>{8, 16, 32}, buf};
}

Verdict cluster(const ResultRecord& r) {
  const auto norms = group(table(r, "raw"), "interface_length", "trace_norm", [](const auto& row) { return num(row[2]) == 1.0; });
  std::vector<double> x, y;
  for (const auto& [len, v] : norms) {
    x.push_back(len);
    y.push_back(mean(v));
  }
  const double slope = loglog_slope(x, y);
  double deficit = 0.0;
  const Table& add = table(r, "additivity");
  const std::size_t a = add.column("xi12"), b = add.column("xi1"), cc = add.column("xi2");
  for (const auto& row : add.rows) deficit = std::max(deficit, std::abs(num(row[a]) - num(row[b]) - num(row[cc])));
  char buf[160];
  std::snprintf(buf, sizeof buf, "slope %.3f (window [0.7, 1.3]); additivity max deficit %g (soft bound 1.1, %zu rows)", slope,
                deficit, add.rows.size());
  return {slope >= 0.7 && slope <= 1.3 && deficit <= 1.1 && !add.rows.empty(), buf};
}

Verdict brownian(const ResultRecord& r, const ExperimentConfig& c) {
  const Table& raw = table(r, "raw");
  const std::size_t nu = raw.column("nu"), d = raw.column("distance"), t = raw.column("t"), p = raw.column("estimate"),
                    se = raw.column("standard_error");
  int bound_fail = 0, erfc_fail = 0;
  double worst = -INFINITY;
  for (const auto& row : raw.rows) {
    const double n = num(row[nu]), dd = num(row[d]), tt = num(row[t]), est = num(row[p]), sigma = num(row[se]);
    const double bound = 2.0 * n * std::exp(-dd * dd / (4.0 * n * tt));
    worst = std::max(worst, (est + 3 * sigma) / bound);
    if (est + 3 * sigma > bound) ++bound_fail;
    if (n == 1 && std::abs(est - std::erfc(dd / (2 * std::sqrt(tt)))) > 3 * sigma) ++erfc_fail;
  }
  char buf[160];
  std::snprintf(buf, sizeof buf, "%zu cells at %g paths; bound failures %d (max (p+3s)/bound %.3f); erfc failures %d",
                raw.rows.size(), c.param("paths"), bound_fail, worst, erfc_fail);
  return {raw.rows.size() == 12 && c.param("paths") >= 1e5 && bound_fail == 0 && erfc_fail == 0, buf};
}

Verdict surface(const ResultRecord& r) {
  const auto xi = group(table(r, "raw"), "length", "xi_per_length", [](const auto& row) { return num(row[2]) == -0.5; });
  const double a = mean(xi.at(512)), b = mean(xi.at(256));
  const double rel = std::abs(a - b) / std::abs(a);
  const Table& split = table(r, "chain_rule");
  const std::size_t x = split.column("xi"), xp = split.column("xi_plus"), xm = split.column("xi_minus");
  long broken = 0;
  for (const auto& row : split.rows) broken += num(row[x]) != num(row[xp]) + num(row[xm]);
  char buf[160];
  std::snprintf(buf, sizeof buf, "relative change %.4f between 256 and 512; chain rule broken at %ld of %zu grid points", rel,
                broken, split.rows.size());
  return {rel <= 0.05 && broken == 0 && !split.rows.empty(), buf};
}

Verdict cutoff(const ResultRecord& r) {
  const auto diff = group(table(r, "raw"), "L", "normalized_difference");
  std::vector<double> m;
  std::string seq;
  for (const auto& [L, v] : diff) {
    m.push_back(mean_abs(v));
    char b[48];
    std::snprintf(b, sizeof b, "%s%g:%.3g", seq.empty() ? "" : ", ", L, m.back());
    seq += b;
  }
  bool dec = m.size() == 4;
  for (std::size_t i = 1; i < m.size(); ++i) dec = dec && m[i] < m[i - 1];
  return {dec, "mean |difference| per volume " + seq};
}

Verdict kirsch(const ResultRecord& r) {
  const auto phi8 = group(table(r, "phi"), "lambda", "phi", [](const auto& row) { return num(row[0]) == 8; });
  const auto phi64 = group(table(r, "phi"), "lambda", "phi", [](const auto& row) { return num(row[0]) == 64; });
  double growth = -INFINITY;
  for (const auto& [l, v] : phi64)
    if (l > 0 && phi8.count(l)) growth = std::max(growth, v.front() - phi8.at(l).front());
  double dual = 0.0;
  const Table& psi = table(r, "psi");
  for (const auto& row : psi.rows)
    if (num(row[psi.column("t")]) == 1.0) dual = std::max(dual, num(row[psi.column("relative_difference")]));
  const bool recorded = r.find_check("phi growth") && r.find_check("psi dual evaluation");
  char buf[200];
  std::snprintf(buf, sizeof buf, "phi growth %g (soft, wanted >= 2)%s; Psi(1) dual relative %.3g", growth,
                growth >= 2 ? "" : " WARNING: below 2", dual);
  return {recorded && dual <= 1e-8, buf};
}

}  // namespace

int main(int argc, char** argv) {
  relaunch_with_portable_blas(argv);
  int failures = 0;
  auto report = [&](int id, const std::string& name, double budget, const std::function<Verdict()>& f) {
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = f();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool ok = v.ok && (budget <= 0 || secs <= budget);
    failures += !ok;
    std::printf("[%s] %2d %s: %s (%.1f s", ok ? "PASS" : "FAIL", id, name.c_str(), v.detail.c_str(), secs);
    if (budget > 0) std::printf(", budget %.0f s", budget);
    std::printf(")\n");
    std::fflush(stdout);
  };

  report(1, "counting oracle equivalence", 30, counting_oracle);
  report(2, "finite-dimensional Birman-Krein", 60, birman_krein);
  report(3, "Laplace identity", 30, laplace_identity);

  const ExperimentKind kinds[] = {ExperimentKind::bulk_limit, ExperimentKind::locality, ExperimentKind::cluster,
                                  ExperimentKind::brownian,   ExperimentKind::surface,  ExperimentKind::cutoff,
                                  ExperimentKind::kirsch,     ExperimentKind::subadditive, ExperimentKind::resolvent};
  std::map<ExperimentKind, ResultRecord> records;
  std::map<ExperimentKind, double> elapsed;
  auto campaign = [&](ExperimentKind k) -> const ResultRecord& {
    if (!records.count(k)) {
      const auto t0 = std::chrono::steady_clock::now();
      records[k] = run_experiment(default_config(k), Executor(1));
      elapsed[k] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
    return records[k];
  };

  report(4, "bulk limit", 600, [&] { return bulk(campaign(ExperimentKind::bulk_limit), default_config(ExperimentKind::bulk_limit)); });
  report(5, "locality", 600, [&] { return locality(campaign(ExperimentKind::locality)); });
  report(6, "cluster scaling", 600, [&] { return cluster(campaign(ExperimentKind::cluster)); });
  report(7, "Brownian bounds", 300, [&] { return brownian(campaign(ExperimentKind::brownian), default_config(ExperimentKind::brownian)); });
  report(8, "surface states", 900, [&] { return surface(campaign(ExperimentKind::surface)); });
  report(9, "cutoff equivalence", 300, [&] { return cutoff(campaign(ExperimentKind::cutoff)); });
  report(11, "Kirsch demonstration", 600, [&] { return kirsch(campaign(ExperimentKind::kirsch)); });

  report(10, "determinism across worker counts", 0, [&]() -> Verdict {
    int differing = 0;
    std::string which;
    for (ExperimentKind k : kinds) {
      const ResultRecord& one = campaign(k);
      const ResultRecord four = run_experiment(default_config(k), Executor(4));
      bool same = one.tables.size() == four.tables.size();
      for (std::size_t i = 0; same && i < one.tables.size(); ++i) same = table_to_csv(one.tables[i]) == table_to_csv(four.tables[i]);
      if (!same) {
        ++differing;
        which += " " + to_string(k);
      }
    }
    return {differing == 0, "CSV bytes of all 9 experiments, workers 1 vs 4" + (which.empty() ? "" : "; differ:" + which)};
  });

  std::printf("acceptance: %d criterion(s) failed\n", failures);
  return failures == 0 ? 0 : 1;
}
