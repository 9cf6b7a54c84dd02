#include "cirloc/model.hpp"

#include "cirloc/errors.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string_view>

namespace cirloc {

Dataset::Dataset(std::vector<CirSnapshot> snapshots, std::vector<AreaId> areas,
                 std::string meta)
    : snapshots_(std::move(snapshots)), areas_(std::move(areas)),
      meta_(std::move(meta)) {
  if (areas_.empty()) {
    for (const auto& s : snapshots_) {
      if (s.label) areas_.push_back(*s.label);
    }
  }
  std::sort(areas_.begin(), areas_.end());
  areas_.erase(std::unique(areas_.begin(), areas_.end()), areas_.end());

  if (snapshots_.empty()) return;
  const bool processed = snapshots_.front().processed;
  const std::size_t expected = bin_count(processed);
  for (std::size_t i = 0; i < snapshots_.size(); ++i) {
    const auto& s = snapshots_[i];
    if (s.processed != processed) {
      throw FormatError("snapshot " + std::to_string(i) +
                        ": mixed processed flags in one dataset");
    }
    if (s.bins.size() != expected) {
      throw FormatError("snapshot " + std::to_string(i) + ": expected " +
                        std::to_string(expected) + " bins, got " +
                        std::to_string(s.bins.size()));
    }
    if (i > 0 && s.seq <= snapshots_[i - 1].seq) {
      throw FormatError("snapshot " + std::to_string(i) +
                        ": seq not strictly increasing");
    }
    if (s.label &&
        !std::binary_search(areas_.begin(), areas_.end(), *s.label)) {
      throw FormatError("snapshot " + std::to_string(i) + ": label " +
                        std::to_string(s.label->id) + " not a declared area");
    }
  }
}

std::vector<const CirSnapshot*> Dataset::of_area(AreaId area) const {
  std::vector<const CirSnapshot*> out;
  for (const auto& s : snapshots_) {
    if (s.label == area) out.push_back(&s);
  }
  return out;
}

DatasetFormat parse_format(const std::string& name) {
  if (name == "csv") return DatasetFormat::csv;
  if (name == "binary" || name == "bin") return DatasetFormat::binary;
  throw ArgumentError("unknown dataset format '" + name + "'");
}

namespace {

constexpr std::array<char, 4> kMagic = {'C', 'I', 'R', '1'};

template <typename T>
void put_le(std::ostream& os, T value) {
  using U = std::make_unsigned_t<T>;
  auto bits = static_cast<U>(value);
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    os.put(static_cast<char>(bits & 0xFF));
    bits = static_cast<U>(bits >> 8);
  }
}

void put_f64(std::ostream& os, double v) {
  put_le(os, std::bit_cast<std::uint64_t>(v));
}

template <typename T>
T get_le(std::istream& is) {
  using U = std::make_unsigned_t<T>;
  std::array<unsigned char, sizeof(T)> buf{};
  if (!is.read(reinterpret_cast<char*>(buf.data()), sizeof(T))) {
    throw FormatError("binary dataset truncated");
  }
  U bits = 0;
  for (std::size_t i = sizeof(T); i-- > 0;) {
    bits = static_cast<U>((bits << 8) | buf[i]);
  }
  return static_cast<T>(bits);
}

double get_f64(std::istream& is) {
  return std::bit_cast<double>(get_le<std::uint64_t>(is));
}

void save_binary(const Dataset& d, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
  os.write(kMagic.data(), kMagic.size());
  put_le<std::uint32_t>(os, static_cast<std::uint32_t>(d.size()));
  put_le<std::uint32_t>(os, static_cast<std::uint32_t>(d.bins()));
  put_le<std::uint8_t>(os, d.processed() ? 1 : 0);
  for (const auto& s : d.snapshots()) {
    put_le<std::int64_t>(os, s.seq);
    put_le<std::int32_t>(os, s.label ? s.label->id : -1);
    for (const auto& c : s.bins) {
      put_f64(os, c.real());
      put_f64(os, c.imag());
    }
  }
  if (!os) throw IoError("write to '" + path.string() + "' failed");
}

Dataset load_binary(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open '" + path.string() + "'");
  std::array<char, 4> magic{};
  if (!is.read(magic.data(), magic.size()) || magic != kMagic) {
    throw FormatError("'" + path.string() + "' is not a CIR1 dataset");
  }
  const auto count = get_le<std::uint32_t>(is);
  const auto bins = get_le<std::uint32_t>(is);
  const bool processed = get_le<std::uint8_t>(is) != 0;
  if (bins != bin_count(processed)) {
    throw FormatError("bin count " + std::to_string(bins) +
                      " does not match processed flag");
  }
  std::vector<CirSnapshot> snaps(count);
  for (auto& s : snaps) {
    s.seq = get_le<std::int64_t>(is);
    const auto label = get_le<std::int32_t>(is);
    if (label >= 0) s.label = AreaId(label);
    s.processed = processed;
    s.bins.resize(bins);
    for (auto& c : s.bins) {
      const double re = get_f64(is);
      const double im = get_f64(is);
      c = Complex(re, im);
    }
  }
  return Dataset(std::move(snaps));
}

void write_double(std::string& out, double v) {
  std::array<char, 32> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  out.append(buf.data(), ptr);
}

void save_csv(const Dataset& d, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
  std::string line = "seq,label,processed";
  for (std::size_t b = 0; b < d.bins(); ++b) {
    line += ",re" + std::to_string(b) + ",im" + std::to_string(b);
  }
  os << line << '\n';
  for (const auto& s : d.snapshots()) {
    line = std::to_string(s.seq) + ',';
    if (s.label) line += std::to_string(s.label->id);
    line += s.processed ? ",1" : ",0";
    for (const auto& c : s.bins) {
      line += ',';
      write_double(line, c.real());
      line += ',';
      write_double(line, c.imag());
    }
    os << line << '\n';
  }
  if (!os) throw IoError("write to '" + path.string() + "' failed");
}

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

template <typename T>
T parse_number(std::string_view field, std::size_t row, const char* what) {
  T value{};
  auto [ptr, ec] =
      std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size()) {
    throw ParseError(row, std::string("invalid ") + what + " '" +
                              std::string(field) + "'");
  }
  return value;
}

Dataset load_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open '" + path.string() + "'");
  std::string line;
  if (!std::getline(is, line)) throw ParseError(1, "missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_commas(line);
  if (header.size() < 5 || header[0] != "seq" || header[1] != "label" ||
      header[2] != "processed" || (header.size() - 3) % 2 != 0) {
    throw ParseError(1, "malformed header");
  }
  const std::size_t bins = (header.size() - 3) / 2;
  if (bins != kRawBins && bins != kProcessedBins) {
    throw FormatError("header declares " + std::to_string(bins) +
                      " bins; expected 50 or 25");
  }

  std::vector<CirSnapshot> snaps;
  std::size_t row = 1;
  while (std::getline(is, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_commas(line);
    if (fields.size() != header.size()) {
      throw ParseError(row, "expected " + std::to_string(header.size()) +
                                " fields, got " +
                                std::to_string(fields.size()));
    }
    CirSnapshot s;
    s.seq = fields[0].empty() ? static_cast<std::int64_t>(snaps.size())
                              : parse_number<std::int64_t>(fields[0], row, "seq");
    if (!fields[1].empty()) {
      const int label = parse_number<int>(fields[1], row, "label");
      if (label < 0) throw ParseError(row, "negative label");
      s.label = AreaId(label);
    }
    if (fields[2] == "1" || fields[2] == "true") {
      s.processed = true;
    } else if (fields[2] == "0" || fields[2] == "false") {
      s.processed = false;
    } else {
      throw ParseError(row, "invalid processed flag");
    }
    if (s.processed != (bins == kProcessedBins)) {
      throw FormatError("row " + std::to_string(row) +
                        ": processed flag does not match bin count");
    }
    s.bins.resize(bins);
    for (std::size_t b = 0; b < bins; ++b) {
      const double re = parse_number<double>(fields[3 + 2 * b], row, "value");
      const double im = parse_number<double>(fields[4 + 2 * b], row, "value");
      if (!std::isfinite(re) || !std::isfinite(im)) {
        throw ParseError(row, "non-finite value in bin " + std::to_string(b));
      }
      s.bins[b] = Complex(re, im);
    }
    snaps.push_back(std::move(s));
  }
  return Dataset(std::move(snaps));
}

}  // namespace

Dataset load_dataset(const std::filesystem::path& path, DatasetFormat format) {
  return format == DatasetFormat::csv ? load_csv(path) : load_binary(path);
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& path,
                  DatasetFormat format) {
  if (format == DatasetFormat::csv) {
    save_csv(dataset, path);
  } else {
    save_binary(dataset, path);
  }
}

MagnitudeVector magnitude(const CirSnapshot& snapshot) {
  if (!snapshot.processed) {
    throw StateError("magnitude() needs a processed snapshot; run preprocess "
                     "first");
  }
  MagnitudeVector out(static_cast<Eigen::Index>(snapshot.bins.size()));
  for (std::size_t m = 0; m < snapshot.bins.size(); ++m) {
    out[static_cast<Eigen::Index>(m)] = std::abs(snapshot.bins[m]);
  }
  return out;
}

namespace {

void check_window_args(int window, int stride) {
  if (window <= 0) throw ArgumentError("window length must be positive");
  if (stride <= 0) throw ArgumentError("window stride must be positive");
}

void emit_run(const std::vector<const CirSnapshot*>& run, std::size_t base,
              int window, int stride, std::vector<SnapshotWindow>& out) {
  const auto len = run.size();
  const auto t = static_cast<std::size_t>(window);
  if (len < t) return;
  for (std::size_t start = 0; start + t <= len;
       start += static_cast<std::size_t>(stride)) {
    SnapshotWindow w;
    w.label = run[start]->label;
    w.origin = base + start;
    w.members.reserve(t);
    for (std::size_t i = start; i < start + t; ++i) {
      w.members.push_back(magnitude(*run[i]));
    }
    out.push_back(std::move(w));
  }
}

}  // namespace

std::vector<SnapshotWindow> slice_windows(const Dataset& dataset, int window,
                                          int stride) {
  check_window_args(window, stride);
  std::vector<SnapshotWindow> out;
  const auto& snaps = dataset.snapshots();
  std::size_t begin = 0;
  while (begin < snaps.size()) {
    std::size_t end = begin + 1;
    while (end < snaps.size() && snaps[end].label == snaps[begin].label) ++end;
    std::vector<const CirSnapshot*> run;
    run.reserve(end - begin);
    for (std::size_t i = begin; i < end; ++i) run.push_back(&snaps[i]);
    emit_run(run, begin, window, stride, out);
    begin = end;
  }
  return out;
}

std::vector<SnapshotWindow> slice_area_windows(const Dataset& dataset,
                                               int window, int stride) {
  check_window_args(window, stride);
  std::vector<SnapshotWindow> out;
  for (const AreaId area : dataset.areas()) {
    emit_run(dataset.of_area(area), 0, window, stride, out);
  }
  return out;
}

}  // namespace cirloc
