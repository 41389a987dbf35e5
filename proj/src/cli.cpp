#include "doubling/cli.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "doubling/errors.hpp"
#include "doubling/growth.hpp"
#include "doubling/measure_mc.hpp"
#include "doubling/model_spaces.hpp"
#include "doubling/parallel.hpp"
#include "doubling/random.hpp"
#include "doubling/search.hpp"

namespace doubling {
namespace {

constexpr double kPi = std::numbers::pi;

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : bytes) h = (h ^ ch) * 0x100000001b3ULL;
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string fmt9(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

std::string csv_row(const std::vector<double>& values) {
  std::string line;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) line += ',';
    line += fmt9(values[i]);
  }
  return line + '\n';
}

template <class T>
T get(const Json& config, const char* key) {
  if (!config.contains(key) || config.at(key).is_null()) {
    throw InvalidArgument(std::string("config is missing '") + key + "'");
  }
  try {
    return config.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw InvalidArgument(std::string("config field '") + key + "' has the wrong type");
  }
}

std::string optional_path(const Json& config, const char* key) {
  return config.contains(key) && config.at(key).is_string() ? config.at(key).get<std::string>() : std::string();
}

std::vector<double> linspace(double lo, double hi, std::size_t steps) {
  std::vector<double> v(steps);
  for (std::size_t i = 0; i < steps; ++i) {
    v[i] = i + 1 == steps ? hi : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(steps - 1);
  }
  return v;
}

void emit_table(Outcome& o, const Json& config, const std::string& csv) {
  const std::string out = optional_path(config, "out");
  if (out.empty()) {
    o.text += csv;
  } else {
    o.artifacts.push_back({out, csv});
  }
}

Outcome cap_scan(const Json& c) {
  const double lo = get<double>(c, "theta_min"), hi = get<double>(c, "theta_max");
  const auto steps = get<std::size_t>(c, "steps");
  const auto samples = get<std::uint64_t>(c, "samples");
  const auto seed = get<std::uint64_t>(c, "seed");
  if (!(lo > 0.0 && lo < hi && hi <= 0.5 * kPi)) throw InvalidArgument("cap-scan: need 0 < theta-min < theta-max <= pi/2");
  if (steps < 2) throw InvalidArgument("cap-scan: steps must be >= 2");
  if (samples < 1) throw InvalidArgument("cap-scan: samples must be >= 1");

  Outcome o;
  std::string csv = "theta,mu,mu2_closed,mu_mc,mu2_mc,ratio,bg_slack,kemperman_slack\n";
  Json rows = Json::array();
  bool ok = true;
  const UnitVec3 u = UnitVec3::ez();
  const auto thetas = linspace(lo, hi, steps);
  for (std::size_t i = 0; i < thetas.size(); ++i) {
    const double t = thetas[i];
    const CapDoubling d = cap_doubling(t);
    const MeasureEstimate e1 = estimate_measure(make_cap(u, t), samples, derive_seed(seed, 2 * i));
    const MeasureEstimate e2 =
        estimate_indicator([&](const Rotation& g) { return in_cap_square(g, u, t); }, samples, derive_seed(seed, 2 * i + 1));
    const bool row_ok = std::abs(e1.value - d.m) <= 4.0 * e1.stderr_ && std::abs(e2.value - d.m2) <= 4.0 * e2.stderr_;
    ok = ok && row_ok;
    const std::vector<double> vals{t, d.m, d.m2, e1.value, e2.value, d.m2 / d.m, bg_slack(d.m, d.m2),
                                   kemperman_slack(d.m, d.m, d.m2)};
    csv += csv_row(vals);
    rows.push_back({{"theta", t}, {"mu", d.m}, {"mu2_closed", d.m2}, {"mu_mc", e1.value}, {"mu_mc_stderr", e1.stderr_},
                    {"mu2_mc", e2.value}, {"mu2_mc_stderr", e2.stderr_}, {"within_4_stderr", row_ok}});
  }
  o.result = {{"rows", rows}, {"all_within_4_stderr", ok}, {"csv", csv}};
  emit_table(o, c, csv);
  if (!ok) o.text += "cap-scan: Monte Carlo cross-check failed (some row beyond 4 stderr)\n";
  o.exit_code = ok ? 0 : 1;
  return o;
}

Outcome ball_scan(const Json& c) {
  const double lo = get<double>(c, "r_min"), hi = get<double>(c, "r_max");
  const auto steps = get<std::size_t>(c, "steps");
  const auto samples = get<std::uint64_t>(c, "samples");
  const auto seed = get<std::uint64_t>(c, "seed");
  if (!(lo > 0.0 && lo < hi && hi <= 0.5 * kPi)) throw InvalidArgument("ball-scan: need 0 < r-min < r-max <= pi/2");
  if (steps < 2) throw InvalidArgument("ball-scan: steps must be >= 2");
  if (samples < 1) throw InvalidArgument("ball-scan: samples must be >= 1");

  Outcome o;
  std::string csv = "r,mu,mu2_closed,mu_mc,ratio,bg_slack,kemperman_slack\n";
  Json rows = Json::array();
  bool ok = true;
  const auto rs = linspace(lo, hi, steps);
  for (std::size_t i = 0; i < rs.size(); ++i) {
    const double r = rs[i];
    const double m = ball_measure(r), m2 = ball_measure(2.0 * r);
    const MeasureEstimate e = estimate_measure(make_ball(r), samples, derive_seed(seed, i));
    const bool row_ok = std::abs(e.value - m) <= 4.0 * e.stderr_ && expansion_gap_check(m, m2) &&
                        kemperman_slack(m, m, m2) >= 0.0;
    ok = ok && row_ok;
    csv += csv_row({r, m, m2, e.value, m2 / m, bg_slack(m, m2), kemperman_slack(m, m, m2)});
    rows.push_back({{"r", r}, {"mu", m}, {"mu2_closed", m2}, {"mu_mc", e.value}, {"mu_mc_stderr", e.stderr_},
                    {"ok", row_ok}});
  }
  o.result = {{"rows", rows}, {"all_ok", ok}, {"csv", csv}};
  emit_table(o, c, csv);
  if (!ok) o.text += "ball-scan: a row failed its Monte Carlo or closed-form check\n";
  o.exit_code = ok ? 0 : 1;
  return o;
}

GridPtr grid_from_config(const Json& c, const GridPtr& preloaded) {
  if (preloaded) return preloaded;
  const auto g = get<std::vector<std::uint32_t>>(c, "grid");
  if (g.size() != 3) throw InvalidArgument("grid must be [n_eta, n_xi1, n_xi2]");
  return build_grid(g[0], g[1], g[2]);
}

Outcome product(const Json& c, const GridPtr& preloaded) {
  const SetSpec a = set_from_json(get<Json>(c, "a"));
  const SetSpec b = set_from_json(get<Json>(c, "b"));
  const ReportMethod method = parse_method(get<std::string>(c, "method"));
  ReportParams p;
  p.seed = get<std::uint64_t>(c, "seed");
  if (method == ReportMethod::mc_grid) {
    p.samples = get<std::uint64_t>(c, "samples");
    p.witnesses = get<std::size_t>(c, "witnesses");
    p.grid = grid_from_config(c, preloaded);
  }
  const GrowthReport r = build_report(a, b, method, p);
  Outcome o;
  o.result = report_to_json(r);
  const double lower_edge = r.mu_ab_lower.value - 3.0 * r.mu_ab_lower.stderr_;
  const bool sandwich = lower_edge <= r.mu_ab_upper;
  const bool kemperman = r.kemperman_slack >= r.kemperman_threshold;
  o.exit_code = sandwich && kemperman ? 0 : 1;
  const std::string report = o.result.dump(2) + "\n";
  const std::string path = optional_path(c, "report");
  if (path.empty()) {
    o.text += report;
  } else {
    o.artifacts.push_back({path, report});
    std::ostringstream s;
    s << "mu(AB) in [" << fmt9(r.mu_ab_lower.value) << " (stderr " << fmt9(r.mu_ab_lower.stderr_) << "), "
      << fmt9(r.mu_ab_upper) << "]\n";
    o.text += s.str();
  }
  if (!sandwich) o.text += "product: lower estimate exceeds the certified upper bound\n";
  if (!kemperman) o.text += "product: Kemperman slack below -3 stderr\n";
  return o;
}

Outcome grid_build(const Json& c) {
  const GridPtr g = build_grid(get<std::uint32_t>(c, "n_eta"), get<std::uint32_t>(c, "n_xi1"), get<std::uint32_t>(c, "n_xi2"));
  const std::string bytes = serialize_grid(*g);
  const bool identical = serialize_grid(*parse_grid(bytes, "<memory>")) == bytes;
  double sum = 0.0;
  for (std::size_t i = 0; i < g->size(); ++i) sum += g->weight(i);
  Outcome o;
  o.result = {{"cells", g->size()},        {"weight_sum", sum},
              {"max_radius", g->max_radius()}, {"bytes", bytes.size()},
              {"content_hash", fnv1a_hex(bytes)},
              {"roundtrip_identical", identical}};
  const std::string cache = optional_path(c, "cache");
  if (!cache.empty()) o.artifacts.push_back({cache, bytes});
  o.text = "grid " + std::to_string(g->size()) + " cells, weight sum " + fmt9(sum) + "\n";
  o.exit_code = identical ? 0 : 1;
  return o;
}

Outcome bm(const Json& c) {
  const double a = get<double>(c, "mu_a"), b = get<double>(c, "mu_b"), ab = get<double>(c, "mu_ab");
  Outcome o;
  try {
    const double r = bm_growth(a, b, ab);
    const double back = std::pow(std::pow(a, 1.0 / r) + std::pow(b, 1.0 / r), r);
    o.result = {{"r", r}, {"relative_residual", std::abs(back - ab) / ab}};
    o.text = "r = " + fmt9(r) + "\n";
  } catch (const NoSolution& e) {
    o.result = {{"r", nullptr}, {"error", e.what()}};
    o.text = std::string(e.what()) + "\n";
    o.exit_code = 1;
  }
  return o;
}

Outcome search(const Json& c) {
  const SearchConfig sc = search_config_from_json(get<Json>(c, "search"));
  const GridPtr g = build_grid(sc.grid.n_eta, sc.grid.n_xi1, sc.grid.n_xi2);
  const SearchResult r = random_restarts(sc, g);
  Outcome o;
  o.result = search_result_to_json(r);
  const std::string path = optional_path(c, "out");
  if (!path.empty()) o.artifacts.push_back({path, o.result.dump(2) + "\n"});
  std::ostringstream s;
  s << "best objective " << fmt9(r.best.value) << " (upper " << fmt9(r.best.upper) << ", measure "
    << fmt9(r.best.measure) << ") after " << r.evaluations << " evaluations\n";
  if (r.family == Family::two_cap_union) s << "axis separation " << fmt9(axis_separation(r.best_params)) << "\n";
  if (!r.feasible) s << "search: optimum violates the measure constraint\n";
  if (r.bound_anomaly) s << "search: bound anomaly (certified bound below 4m(1-m) - 2 gap)\n";
  o.text = s.str();
  o.exit_code = r.feasible && !r.bound_anomaly ? 0 : 1;
  return o;
}

Outcome hyperbolic(const Json& c) {
  const double lo = get<double>(c, "r_min"), hi = get<double>(c, "r_max");
  const auto steps = get<std::size_t>(c, "steps");
  const std::string norm_name = get<std::string>(c, "normalization");
  HyperbolicNormalization norm;
  if (norm_name == "corrected") {
    norm = HyperbolicNormalization::corrected;
  } else if (norm_name == "integral") {
    norm = HyperbolicNormalization::integral;
  } else {
    throw InvalidArgument("hyperbolic: normalization must be corrected or integral");
  }
  if (!(lo > 0.0 && lo < hi)) throw InvalidArgument("hyperbolic: need 0 < r-min < r-max");
  if (steps < 2) throw InvalidArgument("hyperbolic: steps must be >= 2");
  Outcome o;
  std::string csv = "r,m,lhs,rhs,rel_residual,doubling_ratio\n";
  double worst = 0.0;
  bool ratio_ok = true;
  for (double r : linspace(lo, hi, steps)) {
    const double m = hyperbolic_ball_volume(r, norm);
    const HyperbolicCheck h = hyperbolic_double_check(r, norm);
    const double res = std::abs(h.lhs - h.rhs) / h.lhs;
    worst = std::max(worst, res);
    ratio_ok = ratio_ok && h.lhs / m > 4.0;
    csv += csv_row({r, m, h.lhs, h.rhs, res, h.lhs / m});
  }
  const bool ok = worst < 1e-12 && ratio_ok;
  o.result = {{"max_relative_residual", worst}, {"doubling_above_4", ratio_ok}, {"ok", ok}, {"csv", csv}};
  emit_table(o, c, csv);
  if (!ok) o.text += "hyperbolic: identity residual " + fmt9(worst) + " exceeds 1e-12\n";
  o.exit_code = ok ? 0 : 1;
  return o;
}

}  // namespace

std::string result_hash(const Json& result) { return fnv1a_hex(result.dump()); }

Outcome execute(const std::string& sub, const Json& config, const GridPtr& grid) {
  if (sub == "cap-scan") return cap_scan(config);
  if (sub == "ball-scan") return ball_scan(config);
  if (sub == "product") return product(config, grid);
  if (sub == "grid-build") return grid_build(config);
  if (sub == "bm") return bm(config);
  if (sub == "search") return search(config);
  if (sub == "hyperbolic") return hyperbolic(config);
  throw InvalidArgument("unknown subcommand '" + sub + "'");
}

void write_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InvalidArgument("cannot write " + path);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw InvalidArgument("cannot write " + path);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw InvalidArgument("cannot write " + path + ": " + ec.message());
}

namespace {

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open " + path);
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument("cannot parse " + path + ": " + e.what());
  }
}

Json path_or_null(const std::string& p) { return p.empty() ? Json(nullptr) : Json(p); }

int replay(const std::string& path, std::size_t only_line, std::ostream& out) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open journal " + path);
  std::string line;
  std::size_t n = 0, checked = 0;
  bool all = true;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty() || (only_line && n != only_line)) continue;
    Json rec;
    try {
      rec = Json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw InvalidArgument("journal line " + std::to_string(n) + " is not JSON: " + e.what());
    }
    const std::string sub = get<std::string>(rec, "subcommand");
    const Outcome o = execute(sub, get<Json>(rec, "config"));
    const std::string h = result_hash(o.result);
    const bool same = h == get<std::string>(rec, "result_hash");
    all = all && same;
    ++checked;
    out << "line " << n << " " << sub << ": " << (same ? "match" : "MISMATCH") << " " << h << "\n";
  }
  if (checked == 0) throw InvalidArgument("no journal records to replay in " + path);
  return all ? 0 : 1;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Measure-doubling laboratory for SO(3)"};
  app.require_subcommand(1);
  std::string journal = "doubling_lab_journal.jsonl";
  unsigned threads = 0;
  app.add_option("--journal", journal, "JSONL journal to append to (empty string disables)");
  app.add_option("--threads", threads, "worker cap (0 = DOUBLING_LAB_THREADS or hardware)");

  Json config;
  std::string out_path, report_path, a_path, b_path, grid_path, config_path, cache_path;
  double d1 = 0, d2 = 0, d3 = 0;
  std::size_t steps = 0, witnesses = 200, line = 0;
  std::uint64_t samples = 1000000, seed = 1;
  std::uint32_t ne = 0, n1 = 0, n2 = 0;
  std::string method = "mc+grid", normalization = "corrected", from;

  auto* cap = app.add_subcommand("cap-scan", "cap doubling table with Monte Carlo cross-checks");
  cap->add_option("--theta-min", d1)->required();
  cap->add_option("--theta-max", d2)->required();
  cap->add_option("--steps", steps)->required();
  cap->add_option("--samples", samples);
  cap->add_option("--seed", seed);
  cap->add_option("--out", out_path);

  auto* ball = app.add_subcommand("ball-scan", "metric-ball doubling table");
  ball->add_option("--r-min", d1)->required();
  ball->add_option("--r-max", d2)->required();
  ball->add_option("--steps", steps)->required();
  ball->add_option("--samples", samples);
  ball->add_option("--seed", seed);
  ball->add_option("--out", out_path);

  auto* prod = app.add_subcommand("product", "growth report for a pair of sets");
  prod->add_option("--a", a_path)->required();
  prod->add_option("--b", b_path)->required();
  prod->add_option("--grid", grid_path, "grid cache (required for mc+grid)");
  prod->add_option("--witnesses", witnesses);
  prod->add_option("--samples", samples);
  prod->add_option("--seed", seed);
  prod->add_option("--report", report_path);
  prod->add_option("--method", method, "mc+grid or closed-form");

  auto* gb = app.add_subcommand("grid-build", "build and cache a Hopf grid");
  gb->add_option("--n-eta", ne)->required();
  gb->add_option("--n-xi1", n1)->required();
  gb->add_option("--n-xi2", n2)->required();
  gb->add_option("--cache", cache_path)->required();

  auto* bmc = app.add_subcommand("bm", "Brunn-Minkowski exponent");
  bmc->add_option("--mu-a", d1)->required();
  bmc->add_option("--mu-b", d2)->required();
  bmc->add_option("--mu-ab", d3)->required();

  auto* sc = app.add_subcommand("search", "Nelder-Mead search over a set family");
  sc->add_option("--config", config_path)->required();
  sc->add_option("--out", out_path);

  auto* hy = app.add_subcommand("hyperbolic", "hyperbolic tube identity scan");
  hy->add_option("--r-min", d1)->required();
  hy->add_option("--r-max", d2)->required();
  hy->add_option("--steps", steps)->required();
  hy->add_option("--normalization", normalization, "corrected or integral");
  hy->add_option("--out", out_path);

  auto* rp = app.add_subcommand("replay", "rerun journal records and compare result hashes");
  rp->add_option("--from", from, "journal file")->required();
  rp->add_option("--line", line, "1-based record (default: all)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }
  set_worker_count(threads);

  try {
    if (rp->parsed()) return replay(from, line, out);

    std::string sub;
    GridPtr grid;
    if (cap->parsed()) {
      sub = "cap-scan";
      config = {{"theta_min", d1}, {"theta_max", d2}, {"steps", steps}, {"samples", samples}, {"seed", seed},
                {"out", path_or_null(out_path)}};
    } else if (ball->parsed()) {
      sub = "ball-scan";
      config = {{"r_min", d1}, {"r_max", d2}, {"steps", steps}, {"samples", samples}, {"seed", seed},
                {"out", path_or_null(out_path)}};
    } else if (prod->parsed()) {
      sub = "product";
      config = {{"a", set_to_json(load_set_file(a_path))}, {"b", set_to_json(load_set_file(b_path))},
                {"method", method}};
      if (parse_method(method) == ReportMethod::mc_grid) {
        if (grid_path.empty()) throw InvalidArgument("product: --grid is required for mc+grid");
        grid = load_grid(grid_path);
        config["grid"] = {grid->dims().n_eta, grid->dims().n_xi1, grid->dims().n_xi2};
        config["grid_cache"] = grid_path;
        config["witnesses"] = witnesses;
        config["samples"] = samples;
      }
      config["seed"] = seed;
      config["report"] = path_or_null(report_path);
    } else if (gb->parsed()) {
      sub = "grid-build";
      config = {{"n_eta", ne}, {"n_xi1", n1}, {"n_xi2", n2}, {"cache", cache_path}};
    } else if (bmc->parsed()) {
      sub = "bm";
      config = {{"mu_a", d1}, {"mu_b", d2}, {"mu_ab", d3}};
    } else if (sc->parsed()) {
      sub = "search";
      config = {{"search", search_config_to_json(search_config_from_json(read_json_file(config_path)))},
                {"out", path_or_null(out_path)}};
    } else {
      sub = "hyperbolic";
      config = {{"r_min", d1}, {"r_max", d2}, {"steps", steps}, {"normalization", normalization},
                {"out", path_or_null(out_path)}};
    }

    const auto t0 = std::chrono::steady_clock::now();
    const Outcome o = execute(sub, config, grid);
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    for (const auto& a : o.artifacts) write_atomic(a.path, a.content);
    if (sub == "grid-build") {
      const std::string bytes = serialize_grid(*load_grid(cache_path));
      if (bytes != o.artifacts.front().content) {
        err << "grid-build: reloaded cache differs from the built grid\n";
        return 1;
      }
    }
    out << o.text;

    if (!journal.empty()) {
      Json rec;
      rec["subcommand"] = sub;
      rec["config"] = config;
      rec["result"] = o.result;
      rec["result_hash"] = result_hash(o.result);
      rec["exit_code"] = o.exit_code;
      rec["tool_version"] = DOUBLING_LAB_VERSION;
      rec["wall_time_seconds"] = wall;
      std::ofstream j(journal, std::ios::app);
      if (!j) throw InvalidArgument("cannot append to journal " + journal);
      j << rec.dump() << '\n';
    }
    return o.exit_code;
  } catch (const InvalidArgument& e) {
    err << "error: " << e.what() << "\n";
  } catch (const CorruptCache& e) {
    err << "error: " << e.what() << "\n";
  } catch (const SetTooSmall& e) {
    err << "error: " << e.what() << "\n";
  } catch (const DomainError& e) {
    err << "error: " << e.what() << "\n";
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
  }
  return 2;
}

}  // namespace doubling
