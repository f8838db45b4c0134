#include "mmsched/channel.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <string_view>

#include "mmsched/random.hpp"

namespace mmsched {

ChannelMatrix::ChannelMatrix(CMatrix entries) : entries_(std::move(entries)) {
  if (entries_.rows() < 1 || entries_.cols() < 1) {
    throw InvalidArgument("channel must have at least one antenna and one UE");
  }
  if (!entries_.allFinite()) {
    throw InvalidArgument("channel contains non-finite entries");
  }
  for (Eigen::Index u = 0; u < entries_.cols(); ++u) {
    if (entries_.col(u).squaredNorm() == 0.0) {
      throw InvalidArgument("channel column " + std::to_string(u) + " is all-zero");
    }
  }
}

void GeometricChannelParams::validate() const {
  if (num_paths < 1) throw InvalidArgument("num_paths must be >= 1");
  if (!(angle_spread_deg >= 0.0 && angle_spread_deg < 180.0)) {
    throw InvalidArgument("angle_spread_deg must lie in [0, 180)");
  }
  if (!(antenna_spacing_wavelengths > 0.0)) {
    throw InvalidArgument("antenna spacing must be positive");
  }
  if (!(path_decay_db >= 0.0) || !std::isfinite(path_decay_db)) {
    throw InvalidArgument("path_decay_db must be finite and >= 0");
  }
  if (!(max_nominal_angle_deg >= 0.0 && max_nominal_angle_deg <= 90.0)) {
    throw InvalidArgument("max_nominal_angle_deg must lie in [0, 90]");
  }
}

ChannelMatrix generate_rayleigh(Eigen::Index antennas, Eigen::Index ues, std::uint64_t seed) {
  if (antennas < 1 || ues < 1) {
    throw InvalidArgument("generate_rayleigh: B and U must be >= 1");
  }
  Rng rng(seed);
  CMatrix h(antennas, ues);
  // Column-major fill so that adding UEs extends rather than reshuffles.
  for (Eigen::Index u = 0; u < ues; ++u) {
    for (Eigen::Index b = 0; b < antennas; ++b) h(b, u) = rng.complex_normal(1.0);
  }
  return ChannelMatrix(std::move(h));
}

CVector steering_vector(Eigen::Index antennas, double spacing_wavelengths, double angle_deg) {
  if (antennas < 1) throw InvalidArgument("steering_vector: B must be >= 1");
  if (!(angle_deg >= -90.0 && angle_deg <= 90.0)) {
    throw InvalidArgument("steering_vector: angle must lie in [-90, 90] degrees");
  }
  const double phase_step = 2.0 * std::numbers::pi * spacing_wavelengths *
                            std::sin(angle_deg * std::numbers::pi / 180.0);
  CVector a(antennas);
  for (Eigen::Index b = 0; b < antennas; ++b) {
    a(b) = std::polar(1.0, phase_step * static_cast<double>(b));
  }
  return a;
}

ChannelMatrix generate_geometric(Eigen::Index antennas, Eigen::Index ues,
                                 const GeometricChannelParams& params) {
  params.validate();
  if (antennas < 1 || ues < 1) {
    throw InvalidArgument("generate_geometric: B and U must be >= 1");
  }
  if (!params.nominal_angles_deg.empty() &&
      static_cast<Eigen::Index>(params.nominal_angles_deg.size()) != ues) {
    throw InvalidArgument("generate_geometric: nominal_angles_deg must have U entries");
  }

  std::vector<double> path_power(static_cast<std::size_t>(params.num_paths));
  double total = 0.0;
  for (int l = 0; l < params.num_paths; ++l) {
    path_power[l] = std::pow(10.0, -params.path_decay_db * l / 10.0);
    total += path_power[l];
  }
  for (double& p : path_power) p /= total;

  Rng rng(params.seed);
  CMatrix h = CMatrix::Zero(antennas, ues);
  for (Eigen::Index u = 0; u < ues; ++u) {
    const double nominal =
        params.nominal_angles_deg.empty()
            ? rng.uniform(-params.max_nominal_angle_deg, params.max_nominal_angle_deg)
            : params.nominal_angles_deg[static_cast<std::size_t>(u)];
    for (int l = 0; l < params.num_paths; ++l) {
      const double offset = params.angle_spread_deg * (rng.uniform() - 0.5);
      const double angle = std::clamp(nominal + offset, -90.0, 90.0);
      const std::complex<double> gain =
          params.deterministic_gains ? std::complex<double>(std::sqrt(path_power[l]), 0.0)
                                     : rng.complex_normal(path_power[l]);
      h.col(u) += gain * steering_vector(antennas, params.antenna_spacing_wavelengths, angle);
    }
  }
  return ChannelMatrix(std::move(h));
}

PowerControlledChannel apply_power_control(const ChannelMatrix& channel, double eta_db) {
  if (!(eta_db >= 0.0)) throw InvalidArgument("apply_power_control: eta_db must be >= 0");
  const RVector energy = channel.column_energies();
  if ((energy.array() <= 0.0).any()) {
    throw InvalidArgument("apply_power_control: zero-norm column");
  }
  const double ceiling = std::pow(10.0, eta_db / 10.0) * energy.minCoeff();
  RVector delta(energy.size());
  for (Eigen::Index u = 0; u < energy.size(); ++u) {
    delta(u) = std::sqrt(std::min(energy(u), ceiling) / energy(u));
  }
  PowerControlledChannel out;
  out.effective = channel.entries() * delta.asDiagonal();
  out.coefficients = std::move(delta);
  out.eta_db = eta_db;
  return out;
}

// ---------------------------------------------------------------------------

namespace {

using Kind = ChannelParseError::Kind;

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    std::string_view field = line.substr(start, comma == std::string_view::npos
                                                    ? std::string_view::npos
                                                    : comma - start);
    while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) field.remove_prefix(1);
    while (!field.empty() &&
           (field.back() == ' ' || field.back() == '\t' || field.back() == '\r')) {
      field.remove_suffix(1);
    }
    fields.push_back(field);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return fields;
}

template <typename T>
bool parse_number(std::string_view text, T& value) {
  if (text.empty()) return false;
  if (text.front() == '+') text.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  return ec == std::errc() && ptr == text.data() + text.size();
}

}  // namespace

ChannelMatrix load_channel_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw ChannelParseError(Kind::MissingFile, "cannot open channel file: " + path.string());
  }
  std::string line;
  std::size_t line_no = 0;
  auto next_line = [&](std::string& out) {
    while (std::getline(in, out)) {
      ++line_no;
      if (!out.empty() && out.back() == '\r') out.pop_back();
      if (!out.empty()) return true;
    }
    return false;
  };
  auto where = [&] { return path.string() + ":" + std::to_string(line_no); };

  if (!next_line(line)) throw ChannelParseError(Kind::Empty, "empty channel file: " + path.string());
  const auto header = split_fields(line);
  long long b = 0;
  long long u = 0;
  if (header.size() != 2 || !parse_number(header[0], b) || !parse_number(header[1], u) || b < 1 ||
      u < 1) {
    throw ChannelParseError(Kind::MalformedRow, where() + ": expected header `B,U`");
  }

  CMatrix h(b, u);
  long long count = 0;
  while (next_line(line)) {
    const auto fields = split_fields(line);
    long long row = 0;
    long long col = 0;
    double re = 0.0;
    double im = 0.0;
    if (fields.size() != 4 || !parse_number(fields[0], row) || !parse_number(fields[1], col) ||
        !parse_number(fields[2], re) || !parse_number(fields[3], im)) {
      throw ChannelParseError(Kind::MalformedRow, where() + ": expected `row,col,real,imag`");
    }
    if (row < 0 || row >= b || col < 0 || col >= u) {
      throw ChannelParseError(Kind::DimensionMismatch,
                              where() + ": index outside the declared " + std::to_string(b) + "x" +
                                  std::to_string(u) + " shape");
    }
    if (row * u + col != count) {
      // A row that ends early shows up as the next row starting too soon.
      if (row == count / u + 1 && col == 0) {
        throw ChannelParseError(Kind::DimensionMismatch,
                                where() + ": row " + std::to_string(count / u) + " has " +
                                    std::to_string(count % u) + " entries, header declares U=" +
                                    std::to_string(u));
      }
      throw ChannelParseError(Kind::MalformedRow, where() + ": entries must be in row-major order");
    }
    h(row, col) = {re, im};
    ++count;
  }
  if (count != b * u) {
    throw ChannelParseError(Kind::DimensionMismatch,
                            path.string() + ": header declares " + std::to_string(b * u) +
                                " entries, found " + std::to_string(count));
  }
  try {
    return ChannelMatrix(std::move(h));
  } catch (const InvalidArgument& e) {
    throw ChannelParseError(Kind::InvalidChannel, path.string() + ": " + e.what());
  }
}

void write_channel_csv(const ChannelMatrix& channel, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write channel file: " + path.string());
  const CMatrix& h = channel.entries();
  out << h.rows() << ',' << h.cols() << '\n';
  char buf[64];
  for (Eigen::Index r = 0; r < h.rows(); ++r) {
    for (Eigen::Index c = 0; c < h.cols(); ++c) {
      out << r << ',' << c << ',';
      // Shortest representation that round-trips exactly.
      auto res = std::to_chars(buf, buf + sizeof buf, h(r, c).real());
      out.write(buf, res.ptr - buf);
      out << ',';
      res = std::to_chars(buf, buf + sizeof buf, h(r, c).imag());
      out.write(buf, res.ptr - buf);
      out << '\n';
    }
  }
  if (!out) throw std::runtime_error("failed writing channel file: " + path.string());
}

}  // namespace mmsched
