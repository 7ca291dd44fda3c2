#include <doctest.h>

#include <cmath>
#include <random>

#include "tdsim/starnav.hpp"

using namespace tdsim;
using namespace tdsim::nav;

namespace {

constexpr double kDeg = M_PI / 180.0;

std::vector<StarRecord> toy_catalog() {
  return {
      {30.0, 10.0, 10.5}, {31.2, 10.4, 11.0}, {30.6, 9.7, 12.3},  {29.5, 10.8, 10.1},
      {30.9, 10.9, 13.0}, {29.8, 9.4, 11.7},  {31.5, 9.9, 10.9},  {30.3, 10.6, 12.0},
      {29.2, 10.2, 11.2}, {31.8, 10.7, 10.4}, {30.45, 9.55, 13.4}, {29.65, 10.05, 12.8},
  };
}

SkyWindow toy_window() { return {28.5, 32.5, 8.8, 11.6, 9.0}; }

}  // namespace

TEST_CASE("query filters with strict inequalities and sorts by RA") {
  const std::vector<StarRecord> cat = {
      {10.0, 0.0, 10.0}, {20.0, 5.0, 8.0}, {15.0, 2.0, 12.0}};
  SkyWindow w{9.0, 21.0, -1.0, 6.0, 9.0};
  const auto rows = query(cat, w);
  // the 8.0-magnitude star fails BTmag > 9
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].RAdeg == 10.0);
  CHECK(rows[1].RAdeg == 15.0);

  // boundary values are excluded (strict inequalities)
  SkyWindow edge{10.0, 15.0, -1.0, 6.0, 9.0};
  CHECK(query(cat, edge).empty());

  SkyWindow none{100.0, 110.0, -1.0, 6.0, 9.0};
  CHECK(query(cat, none).empty());
}

TEST_CASE("query results are invariant under catalog shuffling") {
  auto cat = toy_catalog();
  const auto ref = query(cat, toy_window());
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    std::shuffle(cat.begin(), cat.end(), rng);
    const auto got = query(cat, toy_window());
    REQUIRE(got.size() == ref.size());
    for (std::size_t i = 0; i < ref.size(); ++i) {
      CHECK(got[i].RAdeg == ref[i].RAdeg);
      CHECK(got[i].DEdeg == ref[i].DEdeg);
    }
  }
}

TEST_CASE("a star at the window centre projects to the image centre") {
  SkyWindow w{29.0, 31.0, 9.0, 11.0, 9.0};
  const PointSet p = project({{30.0, 10.0, 10.0}}, w, 60.0, 256, 256);
  CHECK(p.points[0].x() == doctest::Approx(127.5));
  CHECK(p.points[0].y() == doctest::Approx(127.5));
}

TEST_CASE("small-window projection matches the flat-sky approximation to 0.1%") {
  // exact spherical offsets vs (dRA cos DE, dDE) for a tiny window
  SkyWindow w{29.95, 30.05, 9.95, 10.05, 9.0};
  const double scale = 4000.0;  // px/deg
  const double ra = 30.02, de = 10.03;
  const PointSet p = project({{ra, de, 10.0}}, w, scale, 512, 512);
  const double dx_flat = (ra - 30.0) * std::cos(10.0 * kDeg) * scale;
  const double dy_flat = -(de - 10.0) * scale;
  const double dx = p.points[0].x() - 255.5;
  const double dy = p.points[0].y() - 255.5;
  CHECK(std::abs(dx - dx_flat) < 1e-3 * std::abs(dx_flat));
  CHECK(std::abs(dy - dy_flat) < 1e-3 * std::abs(dy_flat));
}

TEST_CASE("symmetric star pairs project symmetrically") {
  SkyWindow w{29.0, 31.0, -1.0, 1.0, 9.0};
  const PointSet p = project({{29.7, 0.0, 10.0}, {30.3, 0.0, 10.0}}, w, 60.0, 256, 256);
  CHECK(p.points[0].x() + p.points[1].x() == doctest::Approx(2 * 127.5));
  CHECK(p.points[0].y() == doctest::Approx(p.points[1].y()));
}

TEST_CASE("euclidean transform formula examples") {
  EuclideanTransform id;
  CHECK((id.apply({3, 4}) - Eigen::Vector2d(3, 4)).norm() == doctest::Approx(0.0));

  EuclideanTransform shift{1.0, 0.0, 0.0};
  CHECK((shift.apply({0, 0}) - Eigen::Vector2d(1, 0)).norm() == doctest::Approx(0.0));

  EuclideanTransform roll{0.0, 0.0, M_PI / 2};
  const Eigen::Vector2d p = roll.apply({1, 0});
  CHECK(p.x() == doctest::Approx(0.0));
  CHECK(p.y() == doctest::Approx(-1.0));

  // invert undoes apply
  EuclideanTransform t{3.0, -2.0, 0.6};
  const Eigen::Vector2d q(0.4, 1.7);
  CHECK((t.invert(t.apply(q)) - q).norm() < 1e-14);
}

TEST_CASE("fit_euclidean recovers random transforms exactly") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    EuclideanTransform t{10.0 * u(rng), 10.0 * u(rng), 3.0 * u(rng)};
    std::vector<std::pair<Eigen::Vector2d, Eigen::Vector2d>> pairs;
    for (int i = 0; i < 8; ++i) {
      const Eigen::Vector2d s(40.0 * u(rng), 40.0 * u(rng));
      pairs.emplace_back(s, t.apply(s));
    }
    const EuclideanTransform got = fit_euclidean(pairs);
    CHECK(std::abs(got.a - t.a) < 1e-10);
    CHECK(std::abs(got.b - t.b) < 1e-10);
    CHECK(std::abs(std::remainder(got.phi - t.phi, 2 * M_PI)) < 1e-10);
  }
  // identity pairs
  std::vector<std::pair<Eigen::Vector2d, Eigen::Vector2d>> same = {
      {{0, 0}, {0, 0}}, {{1, 2}, {1, 2}}, {{-3, 1}, {-3, 1}}};
  const EuclideanTransform id = fit_euclidean(same);
  CHECK(std::abs(id.a) < 1e-12);
  CHECK(std::abs(id.b) < 1e-12);
  CHECK(std::abs(id.phi) < 1e-12);
}

TEST_CASE("fit_euclidean under noise stays within the Monte-Carlo bound") {
  std::mt19937_64 rng(23);
  std::normal_distribution<double> noise(0.0, 0.2);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 40; ++trial) {
    EuclideanTransform t{5.0 * u(rng), 5.0 * u(rng), 0.5 * u(rng)};
    std::vector<std::pair<Eigen::Vector2d, Eigen::Vector2d>> pairs;
    for (int i = 0; i < 20; ++i) {
      const Eigen::Vector2d s(100.0 * u(rng), 100.0 * u(rng));
      Eigen::Vector2d d = t.apply(s);
      d.x() += noise(rng);
      d.y() += noise(rng);
      pairs.emplace_back(s, d);
    }
    const EuclideanTransform got = fit_euclidean(pairs);
    CHECK(std::abs(got.phi - t.phi) < 0.1 * kDeg);
    CHECK(std::abs(got.a - t.a) < 0.5);
    CHECK(std::abs(got.b - t.b) < 0.5);
  }
}

TEST_CASE("fit_euclidean rejects coincident sources") {
  std::vector<std::pair<Eigen::Vector2d, Eigen::Vector2d>> pairs = {
      {{1, 1}, {2, 2}}, {{1, 1}, {3, 3}}};
  CHECK_THROWS_AS(fit_euclidean(pairs), ValidationError);
}

TEST_CASE("match_and_solve recovers a known transform with full correspondence") {
  const auto stars = query(toy_catalog(), toy_window());
  const PointSet cat = project(stars, toy_window(), 55.0, 256, 256);
  const EuclideanTransform truth{6.0, -9.0, 4.0 * kDeg};
  PointSet img;
  for (const auto& p : cat.points) img.points.push_back(truth.apply(p));
  const MatchResult m = match_and_solve(img, cat);
  CHECK(m.inliers == static_cast<int>(cat.points.size()));
  CHECK(std::abs(m.transform.a - truth.a) < 1e-9);
  CHECK(std::abs(m.transform.b - truth.b) < 1e-9);
  CHECK(std::abs(m.transform.phi - truth.phi) < 1e-12);
  CHECK(m.rms_px < 1e-9);
}

TEST_CASE("match_and_solve needs at least 3 points per side") {
  PointSet two;
  two.points = {{0, 0}, {1, 1}};
  PointSet three;
  three.points = {{0, 0}, {1, 1}, {2, 0}};
  CHECK_THROWS_AS(match_and_solve(two, three), ValidationError);
  CHECK_THROWS_AS(match_and_solve(three, two), ValidationError);
}

TEST_CASE("match_and_solve reports no match on incompatible geometry") {
  PointSet cat;
  cat.points = {{0, 0}, {100, 0}, {0, 100}, {70, 70}};
  PointSet img;  // pairwise separations far outside the catalog's
  img.points = {{0, 0}, {1, 0}, {0, 1}, {1.2, 0.8}};
  CHECK_THROWS_AS(match_and_solve(img, cat), NumericError);
}

TEST_CASE("project rejects wide windows and points behind the tangent plane") {
  SkyWindow wide{0.0, 25.0, -5.0, 5.0, 9.0};
  CHECK_THROWS_AS(project({{10.0, 0.0, 10.0}}, wide, 60.0, 256, 256), ValidationError);
  SkyWindow w{29.0, 31.0, 9.0, 11.0, 9.0};
  CHECK_THROWS_AS(project({{210.0, -10.0, 10.0}}, w, 60.0, 256, 256), NumericError);
}

TEST_CASE("match_and_solve survives 30% spurious image points") {
  const auto stars = query(toy_catalog(), toy_window());
  const PointSet cat = project(stars, toy_window(), 55.0, 256, 256);
  const EuclideanTransform truth{-4.0, 7.5, -6.0 * kDeg};
  PointSet img;
  for (const auto& p : cat.points) img.points.push_back(truth.apply(p));
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(20.0, 230.0);
  const std::size_t spurious = img.points.size() * 3 / 10 + 1;
  for (std::size_t i = 0; i < spurious; ++i) img.points.emplace_back(u(rng), u(rng));
  const MatchResult m = match_and_solve(img, cat);
  CHECK(m.inliers >= static_cast<int>(cat.points.size()) - 1);
  CHECK(std::abs(m.transform.a - truth.a) < 1e-6);
  CHECK(std::abs(m.transform.b - truth.b) < 1e-6);
  CHECK(std::abs(m.transform.phi - truth.phi) < 1e-9);
}

TEST_CASE("attitude examples: identity and pure roll") {
  SkyWindow w{29.0, 31.0, 9.0, 11.0, 9.0};
  const Attitude id = attitude_from_transform(EuclideanTransform{}, w, 60.0);
  CHECK(id.ra_deg == doctest::Approx(30.0));
  CHECK(id.de_deg == doctest::Approx(10.0));
  CHECK(id.roll_rad == doctest::Approx(0.0));

  // a transform with zero translation is a roll about the boresight
  EuclideanTransform roll{0.0, 0.0, 0.3};
  const Attitude r = attitude_from_transform(roll, w, 60.0);
  CHECK(r.ra_deg == doctest::Approx(30.0).epsilon(1e-9));
  CHECK(r.de_deg == doctest::Approx(10.0).epsilon(1e-9));
  CHECK(r.roll_rad == doctest::Approx(0.3));

  // a pure translation moves the boresight by the pixel offset over the scale
  EuclideanTransform shift{-60.0, 0.0, 0.0};  // catalog plane shifted one degree east
  const Attitude s = attitude_from_transform(shift, w, 60.0);
  CHECK(s.ra_deg ==
        doctest::Approx(30.0 + 1.0 / std::cos(10.0 * kDeg)).epsilon(1e-4));
  CHECK(s.de_deg == doctest::Approx(10.0).epsilon(2e-3));
}

namespace {

// Render -> threshold -> cluster -> match -> attitude, with the image formed
// by a camera rotated away from the nominal window pointing.
Attitude pipeline_attitude(double dra_deg, double dde_deg, double roll_deg, int n_stars,
                           double* err_deg = nullptr, unsigned seed = 71) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ura(28.9, 31.1), ude(8.9, 11.1);
  std::vector<StarRecord> cat;
  for (int i = 0; i < n_stars; ++i) cat.push_back({ura(rng), ude(rng), 10.0 + (i % 40) * 0.1});
  SkyWindow w{28.5, 31.5, 8.5, 11.5, 9.0};
  const auto stars = query(cat, w);
  const PointSet catalog_points = center_points(project(stars, w, 70.0, 300, 300), 300, 300);

  // camera pointing offset from the window centre, with roll
  const Mat3 cam = camera_basis(w.ra_center() + dra_deg, w.de_center() + dde_deg) *
                   Eigen::AngleAxisd(-roll_deg * kDeg, Vec3::UnitZ()).toRotationMatrix();
  PointSet seen;
  const double f = 70.0 / kDeg;
  for (const auto& s : stars) {
    const Vec3 d = cam.transpose() * star_direction(s.RAdeg, s.DEdeg);
    if (d.z() < 0.1) continue;
    const double px = 149.5 + f * d.x() / d.z();
    const double py = 149.5 - f * d.y() / d.z();
    if (px < 2 || py < 2 || px > 297 || py > 297) continue;
    seen.points.emplace_back(px, py);
  }
  const GrayImage img = render_points(seen, 300, 300);
  const PointSet image_points =
      center_points(cluster_centroids(threshold(img, 128), 9), 300, 300);
  const MatchResult m = match_and_solve(image_points, catalog_points);
  const Attitude att = attitude_from_transform(m.transform, w, 70.0);
  if (err_deg) {
    const Vec3 want = star_direction(w.ra_center() + dra_deg, w.de_center() + dde_deg);
    const Vec3 got = star_direction(att.ra_deg, att.de_deg);
    *err_deg = std::acos(std::clamp(want.dot(got), -1.0, 1.0)) / kDeg;
  }
  return att;
}

}  // namespace

TEST_CASE("full pipeline recovers boresight and roll from a rendered scene") {
  double err = 0.0;
  const Attitude att = pipeline_attitude(0.21, -0.13, 2.5, 25, &err);
  CHECK(err < 0.05);
  CHECK(std::abs(att.roll_rad / kDeg - 2.5) < 0.1);
}

TEST_CASE("mean attitude error shrinks as the star count grows") {
  const int counts[3] = {5, 10, 20};
  double mean[3] = {0, 0, 0};
  const int seeds = 12;
  for (int c = 0; c < 3; ++c) {
    for (int s = 0; s < seeds; ++s) {
      double err = 0.0;
      pipeline_attitude(0.3, 0.2, 1.0, counts[c], &err, 100 + s);
      mean[c] += err / seeds;
    }
  }
  CHECK(mean[1] < mean[0]);
  CHECK(mean[2] < mean[1]);
}
