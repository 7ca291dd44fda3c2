#include <CLI11.hpp>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <json.hpp>

#include "tdsim/homology.hpp"
#include "tdsim/imaging.hpp"
#include "tdsim/scenario.hpp"
#include "tdsim/starnav.hpp"
#include "tdsim/sysid.hpp"

namespace {

using nlohmann::json;
using namespace tdsim;

constexpr int kExitValidation = 2;
constexpr int kExitNumeric = 3;

int run_one_simulation(const std::string& json_text, const std::string& base_dir,
                       double dt_override, double t_end_override, const std::string& out_path) {
  Scenario sc = parse_scenario(json_text, base_dir);
  if (dt_override > 0) sc.sim.dt = dt_override;
  if (t_end_override >= 0) sc.sim.t_end = t_end_override;
  Program prog = Program::compile(sc.graph);
  SeriesTable table = prog.simulate(sc.sim);
  table.write_csv_file(out_path);
  std::cerr << "wrote " << table.rows() << " rows x " << table.channel_count() + 1
            << " columns to " << out_path << "\n";
  return 0;
}

int run_simulate(const std::string& scenario_path, double dt_override, double t_end_override,
                 const std::string& out_path, const std::string& sweep) {
  std::ifstream f(scenario_path);
  if (!f) throw ValidationError("scenario: cannot open '" + scenario_path + "'");
  std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  const std::string base_dir =
      std::filesystem::path(scenario_path).parent_path().string();
  if (sweep.empty())
    return run_one_simulation(text, base_dir, dt_override, t_end_override, out_path);

  // --sweep "componentId.param=v1,v2,...": independent runs fan out across
  // threads, each with its own freshly parsed scenario
  const auto eq = sweep.find('=');
  const auto dot = sweep.find('.');
  if (eq == std::string::npos || dot == std::string::npos || dot > eq)
    throw ValidationError("sweep: expected componentId.param=v1,v2,...");
  const std::string comp_id = sweep.substr(0, dot);
  const std::string param = sweep.substr(dot + 1, eq - dot - 1);
  std::vector<double> values;
  std::stringstream vs(sweep.substr(eq + 1));
  std::string cell;
  while (std::getline(vs, cell, ',')) {
    try {
      values.push_back(std::stod(cell));
    } catch (const std::exception&) {
      throw ValidationError("sweep: bad value '" + cell + "'");
    }
  }
  if (values.empty()) throw ValidationError("sweep: no values given");

  json doc = json::parse(text);
  bool found = false;
  for (auto& c : doc.at("components"))
    if (c.at("id") == comp_id) found = true;
  if (!found) throw ValidationError("sweep: unknown component '" + comp_id + "'");

  const std::filesystem::path base(out_path);
  const std::string stem = (base.parent_path() / base.stem()).string();
  const std::string ext = base.extension().empty() ? ".csv" : base.extension().string();
  std::vector<std::future<int>> runs;
  for (std::size_t i = 0; i < values.size(); ++i) {
    json variant = doc;
    for (auto& c : variant.at("components"))
      if (c.at("id") == comp_id) c["params"][param] = values[i];
    const std::string out_i = stem + "_" + std::to_string(i + 1) + ext;
    runs.push_back(std::async(std::launch::async,
                              [variant = variant.dump(), base_dir, dt_override, t_end_override,
                               out_i] {
                                return run_one_simulation(variant, base_dir, dt_override,
                                                          t_end_override, out_i);
                              }));
  }
  int worst = 0;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    try {
      runs[i].get();
    } catch (const ValidationError& e) {
      std::cerr << "sweep run " << i + 1 << ": " << e.what() << "\n";
      worst = std::max(worst, kExitValidation);
    } catch (const std::exception& e) {
      std::cerr << "sweep run " << i + 1 << ": " << e.what() << "\n";
      worst = std::max(worst, kExitNumeric);
    }
  }
  return worst;
}

// Two-column u,y CSV; a leading header row is allowed and skipped.
void read_uy(const std::string& path, std::vector<double>& u, std::vector<double>& y) {
  std::ifstream f(path);
  if (!f) throw ValidationError("identify: cannot open '" + path + "'");
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string a, b;
    if (!std::getline(ss, a, ',') || !std::getline(ss, b, ','))
      throw ValidationError("identify: need two columns on line " + std::to_string(lineno));
    try {
      u.push_back(std::stod(a));
      y.push_back(std::stod(b));
    } catch (const std::exception&) {
      if (lineno == 1) continue;  // header
      throw ValidationError("identify: bad number on line " + std::to_string(lineno));
    }
  }
  if (u.size() < 8) throw ValidationError("identify: too few samples in '" + path + "'");
}

sysid::TransferModel model_from_json(const json& j) {
  sysid::TransferModel m;
  m.k = j.value("k", 1.0);
  for (int i = 0; i < 8; ++i) m.T[i] = j.value("T" + std::to_string(i + 1), 0.0);
  return m;
}

json model_to_json(const sysid::TransferModel& m) {
  json j;
  j["k"] = m.k;
  for (int i = 0; i < 8; ++i) j["T" + std::to_string(i + 1)] = m.T[i];
  return j;
}

int run_identify(const std::string& uy_path, double dt, const std::string& init_path,
                 const std::string& out_path, const std::string& bode_path, double wmin,
                 double wmax, int nfreq) {
  std::vector<double> u, y;
  read_uy(uy_path, u, y);

  sysid::TransferModel init;
  if (!init_path.empty()) {
    std::ifstream f(init_path);
    if (!f) throw ValidationError("identify: cannot open '" + init_path + "'");
    init = model_from_json(json::parse(f));
  }

  // log-spaced frequency grid inside the swept band unless the caller narrowed it
  double lo = wmin, hi = wmax;
  if (lo <= 0 || hi <= 0) {
    const auto band = sysid::swept_band(u, dt);
    lo = band.first * 1.10;
    hi = band.second * 0.90;
  }
  if (!(hi > lo)) throw ValidationError("identify: empty analysis band");
  std::vector<double> grid;
  for (int i = 0; i < nfreq; ++i)
    grid.push_back(lo * std::pow(hi / lo, static_cast<double>(i) / (nfreq - 1)));
  const sysid::FreqResponse resp = sysid::estimate_response(u, y, dt, grid);

  const sysid::FitResult fit = sysid::fit_model(resp, init);

  json out = model_to_json(fit.model);
  out["residual"] = fit.residual;
  out["iterations"] = fit.iterations;
  std::ofstream fo(out_path);
  if (!fo) throw ValidationError("identify: cannot open '" + out_path + "' for writing");
  fo << out.dump(2) << "\n";

  if (!bode_path.empty()) {
    std::ofstream fb(bode_path);
    if (!fb) throw ValidationError("identify: cannot open '" + bode_path + "' for writing");
    fb << "omega,gain_db,phase_deg\n";
    char buf[128];
    for (std::size_t i = 0; i < resp.omega.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", resp.omega[i],
                    20.0 * std::log10(resp.gain[i]), resp.phase[i] * 180.0 / M_PI);
      fb << buf;
    }
  }
  std::cerr << "fit residual " << fit.residual << " after " << fit.iterations << " iterations\n";
  return 0;
}

int run_navigate(const std::string& image_path, const std::string& catalog_path, double ra0,
                 double de0, double ra_span, double de_span, double mag_min, double plate_scale,
                 int level, int min_pixels) {
  const GrayImage img = pgm_read(image_path);
  const PointSet image_points = nav::center_points(
      cluster_centroids(threshold(img, level), min_pixels), img.width, img.height);
  const auto catalog = nav::load_catalog(catalog_path);
  const nav::SkyWindow w{ra0 - 0.5 * ra_span, ra0 + 0.5 * ra_span, de0 - 0.5 * de_span,
                         de0 + 0.5 * de_span, mag_min};
  const auto stars = nav::query(catalog, w);
  const PointSet catalog_points = nav::center_points(
      nav::project(stars, w, plate_scale, img.width, img.height), img.width, img.height);
  const nav::MatchResult match = nav::match_and_solve(image_points, catalog_points);
  const nav::Attitude att = nav::attitude_from_transform(match.transform, w, plate_scale);
  json out;
  out["ra"] = att.ra_deg;
  out["de"] = att.de_deg;
  out["roll_deg"] = att.roll_rad * 180.0 / M_PI;
  out["inliers"] = match.inliers;
  out["rms_px"] = match.rms_px;
  std::cout << out.dump() << "\n";
  return 0;
}

int run_homology(const std::string& path, long mod, bool do_cohomology) {
  const ChainComplex c = load_complex(path);

  auto print_groups = [](const std::vector<AbelianGroup>& gs, const std::string& prefix,
                         const std::string& ring) {
    std::string line;
    for (std::size_t n = 0; n < gs.size(); ++n) {
      if (n) line += "; ";
      line += prefix + std::to_string(n) + "=" + gs[n].to_string(ring);
    }
    std::cout << line << "\n";
  };
  if (mod >= 2) {
    print_groups(homology_with_coefficients(c, BigInt(mod)), "H", "Z/" + std::to_string(mod));
  } else if (do_cohomology) {
    print_groups(cohomology(c), "H^", "Z");
  } else {
    print_groups(homology(c), "H", "Z");
  }
  return 0;
}

int run_aero(const std::string& image_path, double scale, int level) {
  const GrayImage img = pgm_read(image_path);
  const double area = projected_area(threshold(img, level), scale);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", area);
  std::cout << "area " << buf << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"component-based engineering simulation toolkit"};
  app.require_subcommand(1);

  // simulate
  std::string scenario_path, out_csv = "out.csv", sweep;
  double dt_override = -1.0, t_end_override = -1.0;
  auto* sim = app.add_subcommand("simulate", "run a scenario file and write the recorded CSV");
  sim->add_option("scenario", scenario_path, "scenario JSON file")->required();
  sim->add_option("--dt", dt_override, "override the step (s)");
  sim->add_option("--t-end", t_end_override, "override the horizon (s)");
  sim->add_option("--out", out_csv, "output CSV path");
  sim->add_option("--sweep", sweep,
                  "componentId.param=v1,v2,...: fan out one run per value");

  // identify
  std::string uy_path, init_path, params_out = "params.json", bode_out;
  double ident_dt = 0.0, wmin = -1.0, wmax = -1.0;
  int nfreq = 40;
  auto* ident = app.add_subcommand("identify", "fit the 9-parameter transfer model to u,y data");
  ident->add_option("data", uy_path, "two-column (u,y) CSV")->required();
  ident->add_option("--dt", ident_dt, "sample period (s)")->required();
  ident->add_option("--init", init_path, "initial model parameters JSON");
  ident->add_option("--out", params_out, "fitted parameters JSON path");
  ident->add_option("--bode", bode_out, "Bode table CSV path (omega, gain_dB, phase_deg)");
  ident->add_option("--wmin", wmin, "lowest analysis frequency (rad/s)");
  ident->add_option("--wmax", wmax, "highest analysis frequency (rad/s)");
  ident->add_option("--nfreq", nfreq, "number of analysis frequencies");

  // navigate
  std::string nav_image, nav_catalog;
  double ra0 = 0, de0 = 0, ra_span = 0, de_span = 0, mag_min = 9.0, plate_scale = 0;
  int nav_threshold = 128, nav_min_pixels = 9;
  auto* navc = app.add_subcommand("navigate", "match a star image against the catalog");
  navc->add_option("--image", nav_image, "PGM star image")->required();
  navc->add_option("--catalog", nav_catalog, "catalog CSV (RAdeg,DEdeg,BTmag)")->required();
  navc->add_option("--ra0", ra0, "window centre RA (deg)")->required();
  navc->add_option("--de0", de0, "window centre DE (deg)")->required();
  navc->add_option("--ra-span", ra_span, "window RA span (deg)")->required();
  navc->add_option("--de-span", de_span, "window DE span (deg)")->required();
  navc->add_option("--mag-min", mag_min, "magnitude cutoff (keep BTmag > cutoff)");
  navc->add_option("--plate-scale", plate_scale, "px/deg")->required();
  navc->add_option("--threshold", nav_threshold, "binarization level");
  navc->add_option("--min-pixels", nav_min_pixels, "cluster size threshold");

  // homology
  std::string complex_path;
  long mod = 0;
  bool do_cohomology = false;
  auto* hom = app.add_subcommand("homology", "homology of an integer chain complex");
  hom->add_option("complex", complex_path, "complex JSON ({dims, boundaries})")->required();
  hom->add_option("--mod", mod, "compute with Z/m coefficients");
  hom->add_flag("--cohomology", do_cohomology, "compute cohomology instead");

  // aero
  std::string aero_image;
  double aero_scale = 0;
  int aero_threshold = 128;
  auto* aero = app.add_subcommand("aero", "projected area of a silhouette image");
  aero->add_option("--image", aero_image, "PGM silhouette")->required();
  aero->add_option("--scale", aero_scale, "metres per pixel")->required();
  aero->add_option("--threshold", aero_threshold, "binarization level");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed())
      return run_simulate(scenario_path, dt_override, t_end_override, out_csv, sweep);
    if (ident->parsed())
      return run_identify(uy_path, ident_dt, init_path, params_out, bode_out, wmin, wmax, nfreq);
    if (navc->parsed())
      return run_navigate(nav_image, nav_catalog, ra0, de0, ra_span, de_span, mag_min,
                          plate_scale, nav_threshold, nav_min_pixels);
    if (hom->parsed()) return run_homology(complex_path, mod, do_cohomology);
    if (aero->parsed()) return run_aero(aero_image, aero_scale, aero_threshold);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  }
  return 0;
}
