#pragma once

#include <memory>
#include <string>
#include <vector>

#include "tdsim/graph.hpp"
#include "tdsim/imaging.hpp"

namespace tdsim::nav {

struct StarRecord {
  double RAdeg = 0.0;
  double DEdeg = 0.0;
  double BTmag = 0.0;
};

/// CSV with header columns RAdeg, DEdeg, BTmag.
std::vector<StarRecord> load_catalog(const std::string& path);

struct SkyWindow {
  double RAmin = 0.0, RAmax = 0.0;  // deg
  double DEmin = 0.0, DEmax = 0.0;  // deg
  double mag_min = 9.0;

  double ra_center() const { return 0.5 * (RAmin + RAmax); }
  double de_center() const { return 0.5 * (DEmin + DEmax); }
};

/// Strict-inequality window and magnitude filter, ascending by RAdeg with
/// ties broken by DEdeg then input order.
std::vector<StarRecord> query(const std::vector<StarRecord>& catalog, const SkyWindow& w);

/// Unit direction of (RA, DE) in degrees.
Vec3 star_direction(double ra_deg, double de_deg);
/// Camera-to-world rotation looking at (RA, DE) with zero roll: columns are
/// east, north and the boresight.
Mat3 camera_basis(double ra_deg, double de_deg);

/// Gnomonic projection about the window centre; plate_scale in px/deg,
/// pixel y grows downward (south), image centre at ((w-1)/2, (h-1)/2).
PointSet project(const std::vector<StarRecord>& stars, const SkyWindow& w, double plate_scale,
                 int image_w, int image_h);

/// x' = (x+a) cos(phi) + (y+b) sin(phi); y' = -(x+a) sin(phi) + (y+b) cos(phi).
struct EuclideanTransform {
  double a = 0.0;
  double b = 0.0;
  double phi = 0.0;  // rad

  Eigen::Vector2d apply(const Eigen::Vector2d& p) const;
  Eigen::Vector2d invert(const Eigen::Vector2d& p) const;
};

/// Least-squares transform taking each source point onto its target;
/// closed form (orthogonal Procrustes for phi, then the translation).
EuclideanTransform fit_euclidean(
    const std::vector<std::pair<Eigen::Vector2d, Eigen::Vector2d>>& pairs);

struct MatchResult {
  EuclideanTransform transform;
  std::vector<std::pair<int, int>> correspondence;  // (catalog index, image index)
  int inliers = 0;
  double rms_px = 0.0;
};

/// Deterministic hypothesize-and-verify alignment: transforms are proposed
/// from point-pair correspondences (pruned by separation compatibility),
/// scored by image points within `tol` px of a transformed catalog point,
/// and the winner refined with fit_euclidean on its inliers. Throws when no
/// hypothesis reaches 3 inliers.
MatchResult match_and_solve(const PointSet& image_points, const PointSet& catalog_points,
                            double tol = 1.5);

struct Attitude {
  double ra_deg = 0.0;
  double de_deg = 0.0;
  double roll_rad = 0.0;
};

/// Shift corner-origin pixel points to centre-origin coordinates, the frame
/// the Euclidean transform is fitted and interpreted in. A transform with
/// a = b = 0 is then a pure roll about the boresight.
PointSet center_points(const PointSet& points, int image_w, int image_h);

/// Boresight = the sky point imaged at the centre pixel, found by pulling the
/// centre back through the transform and inverse-projecting; roll = phi.
/// The transform acts on centre-origin pixel coordinates.
Attitude attitude_from_transform(const EuclideanTransform& t, const SkyWindow& w,
                                 double plate_scale);

/// Paint a 3x3 foreground block around each point (test-scene synthesis and
/// the star-tracker's internal render).
GrayImage render_points(const PointSet& points, int image_w, int image_h, int level = 255);

struct TrackerConfig {
  SkyWindow window;
  double plate_scale = 50.0;  // px/deg
  int image_w = 256;
  int image_h = 256;
  double period = 5.0;  // s between fixes
  int min_pixels = 9;
  int threshold = 128;
};

/// Discrete star tracker: renders the catalog through the craft camera,
/// runs threshold -> clusters -> match -> attitude and holds the fix between
/// updates. Outputs ra/de/roll in degrees, the measured craft attitude as a
/// rotation vector, and an ok flag.
std::unique_ptr<Component> star_tracker(std::string id, std::vector<StarRecord> catalog,
                                        const TrackerConfig& cfg, std::string frame_id);

}  // namespace tdsim::nav
