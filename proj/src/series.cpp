#include "tdsim/series.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

namespace tdsim {

void SeriesTable::check_times() const {
  for (std::size_t i = 1; i < times_.size(); ++i) {
    if (!(times_[i] > times_[i - 1]))
      throw ValidationError("series: sample instants must be strictly increasing");
  }
}

bool SeriesTable::has_channel(const std::string& name) const {
  return std::find(names_.begin(), names_.end(), name) != names_.end();
}

const std::vector<double>& SeriesTable::channel(const std::string& name) const {
  auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) throw ValidationError("series: unknown channel '" + name + "'");
  return columns_[static_cast<std::size_t>(it - names_.begin())];
}

void SeriesTable::add_channel(const std::string& name, std::vector<double> values) {
  if (has_channel(name)) throw ValidationError("series: duplicate channel '" + name + "'");
  if (values.size() != times_.size())
    throw ValidationError("series: channel '" + name + "' length does not match times");
  names_.push_back(name);
  columns_.push_back(std::move(values));
}

void SeriesTable::append_row(double t, const std::vector<double>& values) {
  if (!times_.empty() && !(t > times_.back()))
    throw ValidationError("series: appended time must increase");
  if (values.size() != columns_.size())
    throw ValidationError("series: row width does not match channel count");
  times_.push_back(t);
  for (std::size_t i = 0; i < values.size(); ++i) columns_[i].push_back(values[i]);
}

double SeriesTable::playback(const std::string& chan, double t) const {
  const auto& col = channel(chan);
  if (times_.empty()) throw NumericError("series: playback on empty table");
  if (t < times_.front() || t > times_.back()) {
    std::ostringstream os;
    os << "series: playback time " << t << " outside [" << times_.front() << ", "
       << times_.back() << "]";
    throw NumericError(os.str());
  }
  auto it = std::lower_bound(times_.begin(), times_.end(), t);
  std::size_t j = static_cast<std::size_t>(it - times_.begin());
  if (j < times_.size() && times_[j] == t) return col[j];
  // t lies strictly between j-1 and j here.
  const double t0 = times_[j - 1], t1 = times_[j];
  const double a = (t - t0) / (t1 - t0);
  return (1.0 - a) * col[j - 1] + a * col[j];
}

void SeriesTable::write_csv(std::ostream& os) const {
  os << "t";
  for (const auto& n : names_) os << "," << n;
  os << "\n";
  char buf[32];
  for (std::size_t r = 0; r < times_.size(); ++r) {
    std::snprintf(buf, sizeof buf, "%.17g", times_[r]);
    os << buf;
    for (const auto& c : columns_) {
      std::snprintf(buf, sizeof buf, "%.17g", c[r]);
      os << "," << buf;
    }
    os << "\n";
  }
}

void SeriesTable::write_csv_file(const std::string& path) const {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("series: cannot open '" + path + "' for writing");
  write_csv(f);
}

SeriesTable SeriesTable::read_csv(std::istream& is, const std::string& time_column) {
  std::string line;
  if (!std::getline(is, line)) throw ValidationError("csv: empty input");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::vector<std::string> headers;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) headers.push_back(cell);
  }
  auto tit = std::find(headers.begin(), headers.end(), time_column);
  if (tit == headers.end())
    throw ValidationError("csv: missing time column '" + time_column + "'");
  const std::size_t tcol = static_cast<std::size_t>(tit - headers.begin());

  std::vector<std::vector<double>> cols(headers.size());
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::size_t i = 0;
    while (std::getline(ss, cell, ',')) {
      if (i >= headers.size())
        throw ValidationError("csv: too many cells on line " + std::to_string(lineno));
      try {
        cols[i].push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw ValidationError("csv: bad number '" + cell + "' on line " + std::to_string(lineno));
      }
      ++i;
    }
    if (i != headers.size())
      throw ValidationError("csv: short row on line " + std::to_string(lineno));
  }

  SeriesTable out(cols[tcol]);
  for (std::size_t i = 0; i < headers.size(); ++i) {
    if (i == tcol) continue;
    out.add_channel(headers[i], std::move(cols[i]));
  }
  return out;
}

SeriesTable SeriesTable::read_csv_file(const std::string& path, const std::string& time_column) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("csv: cannot open '" + path + "'");
  return read_csv(f, time_column);
}

}  // namespace tdsim
