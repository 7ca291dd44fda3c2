#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "tdsim/scenario.hpp"
#include "tdsim/starnav.hpp"

using namespace tdsim;

namespace {

namespace fs = std::filesystem;

std::string bin_path() {
  const char* env = std::getenv("TDSIM_BIN");
  REQUIRE_MESSAGE(env != nullptr, "TDSIM_BIN must point at the cli binary");
  return env;
}

std::string fixtures_dir() {
  if (const char* env = std::getenv("TDSIM_FIXTURES")) return env;
  return "fixtures";
}

struct RunResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

RunResult run_cli(const std::string& args) {
  const fs::path outp = fs::temp_directory_path() / "tdsim_cli_out.txt";
  const fs::path errp = fs::temp_directory_path() / "tdsim_cli_err.txt";
  const std::string cmd =
      bin_path() + " " + args + " >" + outp.string() + " 2>" + errp.string();
  const int status = std::system(cmd.c_str());
  RunResult r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  auto slurp = [](const fs::path& p) {
    std::ifstream f(p);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
  };
  r.out = slurp(outp);
  r.err = slurp(errp);
  return r;
}

}  // namespace

TEST_CASE("homology subcommand prints the group line for the klein fixture") {
  const RunResult r = run_cli("homology " + fixtures_dir() + "/klein_complex.json");
  CHECK(r.exit_code == 0);
  CHECK(r.out == "H0=Z; H1=Z/2; H2=0; H3=Z\n");
}

TEST_CASE("homology subcommand rejects the non-complex fixture with exit 2") {
  const RunResult r = run_cli("homology " + fixtures_dir() + "/rp3_paper_complex.json");
  CHECK(r.exit_code == 2);
  CHECK(r.err.find("not a chain complex") != std::string::npos);
  CHECK(r.err.find("d1*d2") != std::string::npos);
}

TEST_CASE("homology subcommand computes Z/2 coefficients and cohomology") {
  const RunResult r = run_cli("homology --mod 2 " + fixtures_dir() + "/klein_complex.json");
  CHECK(r.exit_code == 0);
  CHECK(r.out == "H0=Z/2; H1=Z/2; H2=Z/2; H3=Z/2\n");
  const RunResult c = run_cli("homology --cohomology " + fixtures_dir() + "/klein_complex.json");
  CHECK(c.exit_code == 0);
  CHECK(c.out == "H^0=Z; H^1=0; H^2=Z/2; H^3=Z\n");
}

TEST_CASE("aero subcommand reports the silhouette area") {
  const RunResult r =
      run_cli("aero --image " + fixtures_dir() + "/silhouette.pgm --scale 0.1");
  CHECK(r.exit_code == 0);
  std::stringstream ss(r.out);
  std::string word;
  double area = -1;
  ss >> word >> area;
  CHECK(word == "area");
  CHECK(area == doctest::Approx(1.0));
  CHECK(run_cli("aero --image /nonexistent.pgm --scale 0.1").exit_code == 2);
}

TEST_CASE("simulate subcommand writes the recorded csv") {
  const fs::path out = fs::temp_directory_path() / "tdsim_balls.csv";
  const RunResult r = run_cli("simulate " + fixtures_dir() +
                              "/charged_balls.json --t-end 0.5 --out " + out.string());
  CHECK(r.exit_code == 0);
  const SeriesTable table = SeriesTable::read_csv_file(out.string());
  CHECK(table.rows() == 501);
  CHECK(table.has_channel("ball2.r.x"));
  fs::remove(out);
}

TEST_CASE("simulate runs the mission fixture with a shortened horizon") {
  // also covers catalog paths resolving relative to the scenario file
  const fs::path out = fs::temp_directory_path() / "tdsim_mission.csv";
  const RunResult r = run_cli("simulate " + fixtures_dir() +
                              "/spacecraft_mission.json --t-end 2 --out " + out.string());
  CHECK(r.exit_code == 0);
  const SeriesTable table = SeriesTable::read_csv_file(out.string());
  CHECK(table.rows() == 41);
  CHECK(table.channel("tracker.ok").front() == 1.0);
  fs::remove(out);
}

TEST_CASE("navigate solves the shipped demo scene") {
  const RunResult r = run_cli("navigate --image " + fixtures_dir() +
                              "/star_scene.pgm --catalog " + fixtures_dir() +
                              "/star_catalog.csv --ra0 30 --de0 10 --ra-span 3 --de-span 3 "
                              "--mag-min 9 --plate-scale 70");
  CHECK(r.exit_code == 0);
  const auto j = nlohmann::json::parse(r.out);
  CHECK(std::abs(j.at("roll_deg").get<double>() - 2.0) < 0.1);
  CHECK(j.at("inliers").get<int>() >= 15);
}

TEST_CASE("simulate sweep fans out one run per value") {
  const fs::path out = fs::temp_directory_path() / "tdsim_sweep.csv";
  const RunResult r =
      run_cli("simulate " + fixtures_dir() + "/charged_balls.json --t-end 0.5 --sweep "
              "\"ball2.a=0.5,2.0\" --out " + out.string());
  CHECK(r.exit_code == 0);
  const fs::path o1 = fs::temp_directory_path() / "tdsim_sweep_1.csv";
  const fs::path o2 = fs::temp_directory_path() / "tdsim_sweep_2.csv";
  const SeriesTable t1 = SeriesTable::read_csv_file(o1.string());
  const SeriesTable t2 = SeriesTable::read_csv_file(o2.string());
  // stronger repulsion carries the ball farther
  CHECK(t2.channel("rel.dist").back() > t1.channel("rel.dist").back());
  CHECK(run_cli("simulate " + fixtures_dir() +
                "/charged_balls.json --sweep \"nope.a=1\" --out " + out.string())
            .exit_code == 2);
  fs::remove(o1);
  fs::remove(o2);
}

TEST_CASE("simulate output is byte-stable across runs") {
  const fs::path out1 = fs::temp_directory_path() / "tdsim_stable1.csv";
  const fs::path out2 = fs::temp_directory_path() / "tdsim_stable2.csv";
  const std::string cmd =
      "simulate " + fixtures_dir() + "/charged_balls.json --t-end 0.2 --out ";
  CHECK(run_cli(cmd + out1.string()).exit_code == 0);
  CHECK(run_cli(cmd + out2.string()).exit_code == 0);
  auto slurp = [](const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
  };
  CHECK(slurp(out1) == slurp(out2));
  CHECK(!slurp(out1).empty());
  fs::remove(out1);
  fs::remove(out2);
}

TEST_CASE("simulate maps validation problems to exit 2") {
  CHECK(run_cli("simulate /nonexistent.json").exit_code == 2);
  const fs::path bad = fs::temp_directory_path() / "tdsim_bad.json";
  {
    std::ofstream f(bad);
    f << R"({"components": [{"id": "a", "kind": "nonsense.kind"}]})";
  }
  const RunResult r = run_cli("simulate " + bad.string());
  CHECK(r.exit_code == 2);
  CHECK(r.err.find("nonsense.kind") != std::string::npos);
  fs::remove(bad);
}

TEST_CASE("simulate maps numeric blowups to exit 3") {
  const fs::path bad = fs::temp_directory_path() / "tdsim_blowup.json";
  {
    std::ofstream f(bad);
    // xdot = x^2 from 1 blows up just before t = 1
    f << R"({
      "components": [
        {"id": "sq", "kind": "product", "inputs": {"in1": "x.x", "in2": "x.x"}},
        {"id": "x", "kind": "integrator", "params": {"x0": 1.0}, "inputs": {"dot": "sq.out"}}
      ],
      "sim": {"dt": 0.01, "t_end": 2.0, "record": ["x.x"]}
    })";
  }
  const RunResult r = run_cli("simulate " + bad.string());
  CHECK(r.exit_code == 3);
  CHECK(r.err.find("last good time") != std::string::npos);
  fs::remove(bad);
}

TEST_CASE("navigate subcommand solves a rendered scene") {
  // synthesize a star image from the shipped catalog under a known transform
  const auto catalog = nav::load_catalog(fixtures_dir() + "/star_catalog.csv");
  const nav::SkyWindow w{28.5, 31.5, 8.5, 11.5, 9.0};
  const auto stars = nav::query(catalog, w);
  REQUIRE(stars.size() >= 10);
  const PointSet cat_points =
      nav::center_points(nav::project(stars, w, 70.0, 256, 256), 256, 256);
  const nav::EuclideanTransform truth{5.0, -3.0, 0.030};
  PointSet img_points;  // corner-origin for rendering
  for (const auto& p : cat_points.points) {
    const Eigen::Vector2d q = truth.apply(p) + Eigen::Vector2d(127.5, 127.5);
    if (q.x() > 2 && q.y() > 2 && q.x() < 253 && q.y() < 253) img_points.points.push_back(q);
  }
  const GrayImage img = nav::render_points(img_points, 256, 256);
  const fs::path scene = fs::temp_directory_path() / "tdsim_scene.pgm";
  pgm_write(img, scene.string());

  const RunResult r = run_cli("navigate --image " + scene.string() + " --catalog " +
                              fixtures_dir() +
                              "/star_catalog.csv --ra0 30 --de0 10 --ra-span 3 --de-span 3 "
                              "--mag-min 9 --plate-scale 70");
  CHECK(r.exit_code == 0);
  const auto j = nlohmann::json::parse(r.out);
  CHECK(j.at("inliers").get<int>() >= 10);
  CHECK(std::abs(j.at("roll_deg").get<double>() - 0.030 * 180.0 / M_PI) < 0.1);
  CHECK(j.at("rms_px").get<double>() < 0.7);
  fs::remove(scene);
}

TEST_CASE("identify subcommand writes parameters and a bode table") {
  // quick chirp-driven run of a simple lag plant through the scenario engine
  const std::string text = R"({
    "components": [
      {"id": "u", "kind": "sysid.chirp", "params": {"C": 1.0, "a": 0.4, "b": 0.01}},
      {"id": "plant", "kind": "sysid.biquad",
       "params": {"num": [0.0, 0.0, 1.0], "den": [1.0, 0.8, 0.25]},
       "inputs": {"u": "u.y"}}
    ],
    "sim": {"dt": 0.01, "t_end": 200.0, "record": ["u.y", "plant.y"]}
  })";
  Scenario sc = parse_scenario(text);
  const SeriesTable table = Program::compile(sc.graph).simulate(sc.sim);
  const fs::path uy = fs::temp_directory_path() / "tdsim_uy.csv";
  {
    std::ofstream f(uy);
    f << "u,y\n";
    char buf[80];
    for (std::size_t i = 0; i < table.rows(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", table.channel("u.y")[i],
                    table.channel("plant.y")[i]);
      f << buf;
    }
  }
  const fs::path params = fs::temp_directory_path() / "tdsim_params.json";
  const fs::path bode = fs::temp_directory_path() / "tdsim_bode.csv";
  const RunResult r = run_cli("identify " + uy.string() + " --dt 0.01 --out " + params.string() +
                              " --bode " + bode.string() + " --nfreq 15");
  CHECK(r.exit_code == 0);
  std::ifstream pf(params);
  const auto j = nlohmann::json::parse(pf);
  CHECK(j.contains("k"));
  CHECK(j.contains("T8"));
  CHECK(j.contains("residual"));
  const SeriesTable bt = SeriesTable::read_csv_file(bode.string(), "omega");
  CHECK(bt.rows() == 15);
  fs::remove(uy);
  fs::remove(params);
  fs::remove(bode);
}
