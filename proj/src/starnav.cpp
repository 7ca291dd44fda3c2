#include "tdsim/starnav.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "tdsim/components.hpp"

namespace tdsim::nav {

namespace {
constexpr double kDeg = M_PI / 180.0;
}

std::vector<StarRecord> load_catalog(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error("catalog: cannot open '" + path + "'");
  std::string line;
  if (!std::getline(f, line)) throw ValidationError("catalog: empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::vector<std::string> headers;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) headers.push_back(cell);
  }
  auto col = [&](const std::string& name) {
    auto it = std::find(headers.begin(), headers.end(), name);
    if (it == headers.end()) throw ValidationError("catalog: missing column '" + name + "'");
    return static_cast<std::size_t>(it - headers.begin());
  };
  const std::size_t ra = col("RAdeg"), de = col("DEdeg"), mag = col("BTmag");

  std::vector<StarRecord> out;
  std::size_t lineno = 1;
  while (std::getline(f, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> cells;
    while (std::getline(ss, cell, ',')) {
      try {
        cells.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw ValidationError("catalog: bad number on line " + std::to_string(lineno));
      }
    }
    if (cells.size() != headers.size())
      throw ValidationError("catalog: short row on line " + std::to_string(lineno));
    StarRecord r{cells[ra], cells[de], cells[mag]};
    if (r.RAdeg < 0 || r.RAdeg >= 360 || r.DEdeg < -90 || r.DEdeg > 90)
      throw ValidationError("catalog: coordinates out of range on line " + std::to_string(lineno));
    out.push_back(r);
  }
  return out;
}

std::vector<StarRecord> query(const std::vector<StarRecord>& catalog, const SkyWindow& w) {
  if (!(w.RAmin < w.RAmax) || !(w.DEmin < w.DEmax))
    throw ValidationError("query: window bounds must satisfy min < max");
  std::vector<StarRecord> out;
  for (const StarRecord& r : catalog) {
    if (r.RAdeg > w.RAmin && r.RAdeg < w.RAmax && r.DEdeg > w.DEmin && r.DEdeg < w.DEmax &&
        r.BTmag > w.mag_min)
      out.push_back(r);
  }
  std::stable_sort(out.begin(), out.end(), [](const StarRecord& a, const StarRecord& b) {
    if (a.RAdeg != b.RAdeg) return a.RAdeg < b.RAdeg;
    return a.DEdeg < b.DEdeg;
  });
  return out;
}

Vec3 star_direction(double ra_deg, double de_deg) {
  const double ra = ra_deg * kDeg, de = de_deg * kDeg;
  return {std::cos(de) * std::cos(ra), std::cos(de) * std::sin(ra), std::sin(de)};
}

Mat3 camera_basis(double ra_deg, double de_deg) {
  const double ra = ra_deg * kDeg, de = de_deg * kDeg;
  const Vec3 east(-std::sin(ra), std::cos(ra), 0.0);
  const Vec3 north(-std::sin(de) * std::cos(ra), -std::sin(de) * std::sin(ra), std::cos(de));
  Mat3 m;
  m.col(0) = east;
  m.col(1) = north;
  m.col(2) = star_direction(ra_deg, de_deg);
  return m;
}

PointSet project(const std::vector<StarRecord>& stars, const SkyWindow& w, double plate_scale,
                 int image_w, int image_h) {
  if (w.RAmax - w.RAmin >= 20.0 || w.DEmax - w.DEmin >= 20.0)
    throw ValidationError("project: window span must stay below 20 deg");
  const Mat3 cam = camera_basis(w.ra_center(), w.de_center());
  const double f = plate_scale / kDeg;  // px per radian
  const double cx = 0.5 * (image_w - 1), cy = 0.5 * (image_h - 1);
  PointSet out;
  for (const StarRecord& s : stars) {
    const Vec3 d = cam.transpose() * star_direction(s.RAdeg, s.DEdeg);
    if (d.z() <= 0)
      throw NumericError("project: star more than 90 deg from the tangent point");
    out.points.emplace_back(cx + f * d.x() / d.z(), cy - f * d.y() / d.z());
  }
  return out;
}

Eigen::Vector2d EuclideanTransform::apply(const Eigen::Vector2d& p) const {
  const double c = std::cos(phi), s = std::sin(phi);
  const double x = p.x() + a, y = p.y() + b;
  return {x * c + y * s, -x * s + y * c};
}

Eigen::Vector2d EuclideanTransform::invert(const Eigen::Vector2d& p) const {
  const double c = std::cos(phi), s = std::sin(phi);
  return {p.x() * c - p.y() * s - a, p.x() * s + p.y() * c - b};
}

EuclideanTransform fit_euclidean(
    const std::vector<std::pair<Eigen::Vector2d, Eigen::Vector2d>>& pairs) {
  if (pairs.size() < 2) throw ValidationError("fit_euclidean: need at least 2 pairs");
  Eigen::Vector2d sc = Eigen::Vector2d::Zero(), tc = Eigen::Vector2d::Zero();
  for (const auto& [s, t] : pairs) {
    sc += s;
    tc += t;
  }
  sc /= static_cast<double>(pairs.size());
  tc /= static_cast<double>(pairs.size());
  double A = 0.0, B = 0.0;
  for (const auto& [s, t] : pairs) {
    const Eigen::Vector2d u = s - sc, v = t - tc;
    A += u.dot(v);
    B += u.y() * v.x() - u.x() * v.y();
  }
  if (std::hypot(A, B) < 1e-12)
    throw ValidationError("fit_euclidean: source points coincide, transform underdetermined");
  EuclideanTransform out;
  out.phi = std::atan2(B, A);
  // R'(centroid_s + tau) = centroid_t
  const double c = std::cos(out.phi), s = std::sin(out.phi);
  const Eigen::Vector2d rt(tc.x() * c - tc.y() * s, tc.x() * s + tc.y() * c);
  out.a = rt.x() - sc.x();
  out.b = rt.y() - sc.y();
  return out;
}

namespace {

struct Scored {
  int inliers = 0;
  std::vector<std::pair<int, int>> pairs;
  double sq_sum = 0.0;
};

Scored score_transform(const EuclideanTransform& t, const PointSet& image,
                       const PointSet& catalog, double tol) {
  Scored s;
  std::vector<char> taken(image.points.size(), 0);
  for (std::size_t c = 0; c < catalog.points.size(); ++c) {
    const Eigen::Vector2d p = t.apply(catalog.points[c]);
    int best = -1;
    double best_d2 = tol * tol;
    for (std::size_t i = 0; i < image.points.size(); ++i) {
      if (taken[i]) continue;
      const double d2 = (image.points[i] - p).squaredNorm();
      if (d2 < best_d2) {
        best_d2 = d2;
        best = static_cast<int>(i);
      }
    }
    if (best >= 0) {
      taken[best] = 1;
      s.pairs.emplace_back(static_cast<int>(c), best);
      s.sq_sum += best_d2;
      ++s.inliers;
    }
  }
  return s;
}

}  // namespace

MatchResult match_and_solve(const PointSet& image_points, const PointSet& catalog_points,
                            double tol) {
  const std::size_t ni = image_points.points.size(), nc = catalog_points.points.size();
  if (ni < 3 || nc < 3)
    throw ValidationError("match_and_solve: need at least 3 points on both sides");

  const int full = static_cast<int>(std::min(ni, nc));
  EuclideanTransform best_t;
  int best_score = -1;
  bool done = false;

  for (std::size_t a = 0; a < nc && !done; ++a) {
    for (std::size_t b = a + 1; b < nc && !done; ++b) {
      const Eigen::Vector2d u = catalog_points.points[b] - catalog_points.points[a];
      const double du = u.norm();
      if (du < 1e-9) continue;
      for (std::size_t i = 0; i < ni && !done; ++i) {
        for (std::size_t j = 0; j < ni && !done; ++j) {
          if (i == j) continue;
          const Eigen::Vector2d v = image_points.points[j] - image_points.points[i];
          if (std::abs(v.norm() - du) > 2.0 * tol) continue;
          // solve R'(u) = v for the rotation, then the translation
          const double c = (v.x() * u.x() + v.y() * u.y()) / (du * du);
          const double s = (v.x() * u.y() - v.y() * u.x()) / (du * du);
          EuclideanTransform t;
          t.phi = std::atan2(s, c);
          const double cc = std::cos(t.phi), ss = std::sin(t.phi);
          // R'^T p_img = p_cat + tau
          const Eigen::Vector2d& pi = image_points.points[i];
          const Eigen::Vector2d& pa = catalog_points.points[a];
          t.a = pi.x() * cc - pi.y() * ss - pa.x();
          t.b = pi.x() * ss + pi.y() * cc - pa.y();
          const Scored sc = score_transform(t, image_points, catalog_points, tol);
          if (sc.inliers > best_score) {
            best_score = sc.inliers;
            best_t = t;
            if (best_score == full) done = true;
          }
        }
      }
    }
  }
  if (best_score < 3) throw NumericError("match_and_solve: no match (best score below 3)");

  // refine on inliers, twice, re-collecting the correspondence in between
  MatchResult out;
  out.transform = best_t;
  for (int pass = 0; pass < 2; ++pass) {
    const Scored sc = score_transform(out.transform, image_points, catalog_points, tol);
    if (sc.inliers < 3) break;
    std::vector<std::pair<Eigen::Vector2d, Eigen::Vector2d>> pairs;
    for (const auto& [c, i] : sc.pairs)
      pairs.emplace_back(catalog_points.points[c], image_points.points[i]);
    out.transform = fit_euclidean(pairs);
  }
  const Scored fin = score_transform(out.transform, image_points, catalog_points, tol);
  out.correspondence = fin.pairs;
  out.inliers = fin.inliers;
  out.rms_px = fin.inliers ? std::sqrt(fin.sq_sum / fin.inliers) : 0.0;
  return out;
}

PointSet center_points(const PointSet& points, int image_w, int image_h) {
  const double cx = 0.5 * (image_w - 1), cy = 0.5 * (image_h - 1);
  PointSet out;
  out.points.reserve(points.points.size());
  for (const auto& p : points.points) out.points.emplace_back(p.x() - cx, p.y() - cy);
  return out;
}

Attitude attitude_from_transform(const EuclideanTransform& t, const SkyWindow& w,
                                 double plate_scale) {
  const Eigen::Vector2d center_src = t.invert({0.0, 0.0});
  const double f = plate_scale / kDeg;
  const double xi = center_src.x() / f;
  const double eta = -center_src.y() / f;
  const Vec3 dir = camera_basis(w.ra_center(), w.de_center()) * Vec3(xi, eta, 1.0).normalized();
  Attitude out;
  out.ra_deg = std::atan2(dir.y(), dir.x()) / kDeg;
  if (out.ra_deg < 0) out.ra_deg += 360.0;
  out.de_deg = std::asin(std::clamp(dir.z(), -1.0, 1.0)) / kDeg;
  out.roll_rad = t.phi;
  return out;
}

GrayImage render_points(const PointSet& points, int image_w, int image_h, int level) {
  GrayImage img = make_gray(image_w, image_h);
  // Gaussian blob evaluated from the exact (sub-pixel) centre; thresholding
  // at level/2 leaves a disk of at least 9 pixels per star.
  const double sigma = 1.6;
  const int rad = 4;
  for (const auto& p : points.points) {
    const int x0 = static_cast<int>(std::lround(p.x()));
    const int y0 = static_cast<int>(std::lround(p.y()));
    for (int dy = -rad; dy <= rad; ++dy) {
      for (int dx = -rad; dx <= rad; ++dx) {
        const int px = x0 + dx, py = y0 + dy;
        if (px < 0 || py < 0 || px >= image_w || py >= image_h) continue;
        const double d2 = (px - p.x()) * (px - p.x()) + (py - p.y()) * (py - p.y());
        const double v = level * std::exp(-d2 / (2.0 * sigma * sigma));
        if (v > img.at(px, py)) img.set(px, py, static_cast<std::uint16_t>(std::lround(v)));
      }
    }
  }
  return img;
}

namespace {

class StarTrackerComponent : public Component {
 public:
  StarTrackerComponent(std::string id, std::vector<StarRecord> catalog, const TrackerConfig& cfg,
                       std::string frame_id)
      : Component(std::move(id)), cfg_(cfg), frame_(std::move(frame_id)) {
    if (!(cfg_.period > 0)) throw ValidationError("star tracker: period must be > 0");
    if (cfg_.image_w < 16 || cfg_.image_h < 16)
      throw ValidationError("star tracker: image too small");
    const auto visible = query(catalog, cfg_.window);
    if (visible.size() < 3)
      throw ValidationError("star tracker: fewer than 3 catalog stars in the window");
    catalog_points_ = center_points(
        project(visible, cfg_.window, cfg_.plate_scale, cfg_.image_w, cfg_.image_h),
        cfg_.image_w, cfg_.image_h);
    for (const StarRecord& s : visible) directions_.push_back(star_direction(s.RAdeg, s.DEdeg));
    mount_ = camera_basis(cfg_.window.ra_center(), cfg_.window.de_center());
    add_output("ra", ValueTag::Scalar);
    add_output("de", ValueTag::Scalar);
    add_output("roll", ValueTag::Scalar);
    add_output("phi_meas", ValueTag::Vec3);
    add_output("ok", ValueTag::Scalar);
    add_order_dep(frame_);
    reset();
  }

  std::string_view kind() const override { return "nav.startracker"; }
  bool discrete() const override { return true; }
  void reset() override {
    next_fix_ = 0.0;
    ra_ = cfg_.window.ra_center();
    de_ = cfg_.window.de_center();
    roll_ = 0.0;
    phi_meas_ = Vec3::Zero();
    ok_ = 0.0;
  }

  void eval(EvalContext& ctx) override {
    ctx.out(0, ra_);
    ctx.out(1, de_);
    ctx.out(2, roll_ / kDeg);
    ctx.out(3, phi_meas_);
    ctx.out(4, ok_);
  }

  void update(EvalContext& ctx, double) override {
    if (ctx.t() + 1e-12 < next_fix_) return;
    next_fix_ += cfg_.period;
    const WorldPose& pose = ctx.frames().world_pose(frame_);
    const Mat3 cam = pose.q.toRotationMatrix() * mount_;
    const double f = cfg_.plate_scale / kDeg;
    const double cx = 0.5 * (cfg_.image_w - 1), cy = 0.5 * (cfg_.image_h - 1);
    PointSet seen;
    for (const Vec3& u : directions_) {
      const Vec3 d = cam.transpose() * u;
      if (d.z() < 0.05) continue;
      const double px = cx + f * d.x() / d.z();
      const double py = cy - f * d.y() / d.z();
      if (px < 1 || py < 1 || px > cfg_.image_w - 2 || py > cfg_.image_h - 2) continue;
      seen.points.emplace_back(px, py);
    }
    try {
      const GrayImage img = render_points(seen, cfg_.image_w, cfg_.image_h);
      const PointSet image_points = center_points(
          cluster_centroids(threshold(img, cfg_.threshold), cfg_.min_pixels), cfg_.image_w,
          cfg_.image_h);
      const MatchResult match = match_and_solve(image_points, catalog_points_);
      const Attitude att =
          attitude_from_transform(match.transform, cfg_.window, cfg_.plate_scale);
      const Mat3 cam_meas = camera_basis(att.ra_deg, att.de_deg) *
                            Eigen::AngleAxisd(-att.roll_rad, Vec3::UnitZ()).toRotationMatrix();
      const Mat3 craft = cam_meas * mount_.transpose();
      ra_ = att.ra_deg;
      de_ = att.de_deg;
      roll_ = att.roll_rad;
      phi_meas_ = rotation_vector(Quat(craft));
      ok_ = 1.0;
    } catch (const Error&) {
      ok_ = 0.0;  // hold the previous fix
    }
  }

 private:
  TrackerConfig cfg_;
  std::string frame_;
  PointSet catalog_points_;
  std::vector<Vec3> directions_;
  Mat3 mount_;
  double next_fix_ = 0.0;
  double ra_ = 0.0, de_ = 0.0, roll_ = 0.0, ok_ = 0.0;
  Vec3 phi_meas_ = Vec3::Zero();
};

}  // namespace

std::unique_ptr<Component> star_tracker(std::string id, std::vector<StarRecord> catalog,
                                        const TrackerConfig& cfg, std::string frame_id) {
  return std::make_unique<StarTrackerComponent>(std::move(id), std::move(catalog), cfg,
                                                std::move(frame_id));
}

}  // namespace tdsim::nav
