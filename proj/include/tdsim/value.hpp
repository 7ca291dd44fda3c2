#pragma once

#include <memory>
#include <string>
#include <variant>

#include "tdsim/common.hpp"
#include "tdsim/homology.hpp"
#include "tdsim/imaging.hpp"
#include "tdsim/series.hpp"

namespace tdsim {

enum class ValueTag { Scalar, Vec3, Quat, Matrix, IntMatrix, Series, Image, Table };

std::string_view tag_name(ValueTag t);

/// Named columns of scalars without a time axis (query results and the like).
struct Table {
  std::vector<std::string> columns;
  MatX rows;  // one row per record
};

/// Tagged datum flowing on graph edges. Small payloads are held by value,
/// bulky ones behind shared const pointers so copies stay cheap.
class Value {
 public:
  Value() : v_(0.0) {}
  Value(double s) : v_(s) {}
  Value(const Vec3& v) : v_(v) {}
  Value(const Quat& q) : v_(q.normalized()) {
    if (std::abs(q.norm() - 1.0) > 1e-9) throw ValidationError("quaternion payload not unit norm");
  }
  Value(const MatX& m) : v_(m) {}
  Value(std::shared_ptr<const IntMatrix> m) : v_(std::move(m)) {}
  Value(std::shared_ptr<const SeriesTable> s) : v_(std::move(s)) {}
  Value(std::shared_ptr<const GrayImage> i) : v_(std::move(i)) {}
  Value(std::shared_ptr<const Table> t) : v_(std::move(t)) {}

  ValueTag tag() const { return static_cast<ValueTag>(v_.index()); }

  double as_scalar() const { return get<double>(ValueTag::Scalar); }
  const Vec3& as_vec3() const { return get<Vec3>(ValueTag::Vec3); }
  const Quat& as_quat() const { return get<Quat>(ValueTag::Quat); }
  const MatX& as_matrix() const { return get<MatX>(ValueTag::Matrix); }
  const IntMatrix& as_int_matrix() const {
    return *get<std::shared_ptr<const IntMatrix>>(ValueTag::IntMatrix);
  }
  const SeriesTable& as_series() const {
    return *get<std::shared_ptr<const SeriesTable>>(ValueTag::Series);
  }
  const GrayImage& as_image() const {
    return *get<std::shared_ptr<const GrayImage>>(ValueTag::Image);
  }
  const Table& as_table() const { return *get<std::shared_ptr<const Table>>(ValueTag::Table); }

  bool finite() const;

 private:
  template <class T>
  const T& get(ValueTag want) const {
    if (tag() != want)
      throw NumericError(std::string("value tag mismatch: have ") + std::string(tag_name(tag())) +
                         ", want " + std::string(tag_name(want)));
    return std::get<T>(v_);
  }

  std::variant<double, Vec3, Quat, MatX, std::shared_ptr<const IntMatrix>,
               std::shared_ptr<const SeriesTable>, std::shared_ptr<const GrayImage>,
               std::shared_ptr<const Table>>
      v_;
};

}  // namespace tdsim
