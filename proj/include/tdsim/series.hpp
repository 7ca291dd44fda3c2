#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "tdsim/common.hpp"

namespace tdsim {

/// Time series with strictly increasing sample instants and named scalar
/// channels, all of the same length. Used both for recorded simulation
/// output and for playback of prerecorded input signals.
class SeriesTable {
 public:
  SeriesTable() = default;
  explicit SeriesTable(std::vector<double> times) : times_(std::move(times)) { check_times(); }

  const std::vector<double>& times() const { return times_; }
  std::size_t rows() const { return times_.size(); }
  std::size_t channel_count() const { return names_.size(); }
  const std::vector<std::string>& channel_names() const { return names_; }

  bool has_channel(const std::string& name) const;
  const std::vector<double>& channel(const std::string& name) const;

  void add_channel(const std::string& name, std::vector<double> values);
  /// Append one row; `values` must follow channel order.
  void append_row(double t, const std::vector<double>& values);

  /// Linear interpolation between the bracketing samples; exact at knots.
  /// Out-of-range queries are an error, never extrapolated.
  double playback(const std::string& channel, double t) const;

  void write_csv(std::ostream& os) const;
  void write_csv_file(const std::string& path) const;
  static SeriesTable read_csv(std::istream& is, const std::string& time_column = "t");
  static SeriesTable read_csv_file(const std::string& path, const std::string& time_column = "t");

 private:
  void check_times() const;
  std::vector<double> times_;
  std::vector<std::string> names_;
  std::vector<std::vector<double>> columns_;
};

}  // namespace tdsim
