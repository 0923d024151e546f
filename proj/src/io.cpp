#include "ballistic/io.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace ballistic {

namespace {

std::string seed_line(std::uint64_t seed) { return "# seed=" + std::to_string(seed) + "\n"; }

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream ss(line);
  while (std::getline(ss, cur, sep)) out.push_back(cur);
  return out;
}

double parse_double(const std::string& s) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw InputError("not a number: '" + s + "'");
  }
  if (used != s.size()) throw InputError("not a number: '" + s + "'");
  return v;
}

void append_bytes(std::string& out, double v, bool swap) {
  char buf[sizeof(double)];
  std::memcpy(buf, &v, sizeof v);
  if (swap) std::reverse(buf, buf + sizeof buf);
  out.append(buf, sizeof buf);
}

double read_bytes(const char* p, bool swap) {
  char buf[sizeof(double)];
  std::memcpy(buf, p, sizeof buf);
  if (swap) std::reverse(buf, buf + sizeof buf);
  double v = 0.0;
  std::memcpy(&v, buf, sizeof v);
  return v;
}

constexpr bool kHostLittle = std::endian::native == std::endian::little;

}  // namespace

std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw NumericError("SHA-256 computation failed");
  }
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xF]);
  }
  return out;
}

// --- ArtifactWriter ------------------------------------------------------------------------------

ArtifactWriter::ArtifactWriter(std::filesystem::path directory, std::uint64_t seed)
    : directory_(std::move(directory)), seed_(seed) {
  std::error_code ec;
  std::filesystem::create_directories(directory_, ec);
  if (ec) throw InputError("cannot create output directory '" + directory_.string() + "': " + ec.message());
}

void ArtifactWriter::write(const std::string& name, std::string_view bytes) {
  if (name == "manifest.json") throw InputError("manifest.json is reserved");
  const std::lock_guard<std::mutex> lock(mutex_);
  const auto path = directory_ / name;
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw InputError("cannot write artifact '" + path.string() + "'");
  ArtifactEntry e{name, sha256_hex(bytes), bytes.size()};
  const auto it = std::find_if(entries_.begin(), entries_.end(), [&](const auto& x) { return x.name == name; });
  if (it != entries_.end()) {
    *it = e;
  } else {
    entries_.push_back(e);
  }
}

std::vector<ArtifactEntry> ArtifactWriter::entries() const {
  const std::lock_guard<std::mutex> lock(mutex_);
  auto out = entries_;
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.name < b.name; });
  return out;
}

void ArtifactWriter::write_manifest(const std::string& config_sha256, const std::string& scenario) {
  nlohmann::ordered_json j;
  j["schema"] = "ballistic-manifest/1";
  j["scenario"] = scenario;
  j["seed"] = seed_;
  j["config_sha256"] = config_sha256;
  j["artifacts"] = nlohmann::ordered_json::array();
  for (const auto& e : entries()) {
    j["artifacts"].push_back({{"name", e.name}, {"sha256", e.sha256}, {"bytes", e.bytes}});
  }
  const std::string text = j.dump(2) + "\n";
  const std::lock_guard<std::mutex> lock(mutex_);
  std::ofstream out(directory_ / "manifest.json", std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw InputError("cannot write manifest");
}

// --- CSV -----------------------------------------------------------------------------------------

std::string branches_csv(const std::vector<BranchResult>& results, std::uint64_t seed) {
  std::string s = seed_line(seed) + "kx,ky,lambda,gx,gy,weight,gap,resonant_flag\n";
  for (const auto& r : results) {
    if (const auto* p = std::get_if<DispersionPoint>(&r)) {
      s += format_number(p->k.x) + "," + format_number(p->k.y) + "," + format_number(p->lambda) + "," +
           format_number(p->grad.x) + "," + format_number(p->grad.y) + "," + format_number(p->weight) + "," +
           format_number(p->gap) + ",0\n";
    } else {
      const auto& f = std::get<ResonantFlag>(r);
      s += format_number(f.k.x) + "," + format_number(f.k.y) + "," + format_number(f.lambda) + ",nan,nan," +
           format_number(f.weight) + "," + format_number(f.gap) + ",1\n";
    }
  }
  return s;
}

std::string curve_csv(const IsoenergeticCurve& curve, std::uint64_t seed) {
  std::string s = seed_line(seed) + "phi,kappa,member\n";
  for (const auto& c : curve.samples) {
    s += format_number(c.phi) + "," + format_number(c.kappa) + "," + (c.member ? "1" : "0") + "\n";
  }
  return s;
}

std::string profile_csv(const MomentumProfile& profile, std::uint64_t seed) {
  const Grid& g = profile.grid;
  std::string s = seed_line(seed) + "kx,ky,re,im\n";
  for (int i = 0; i < g.n1; ++i) {
    for (int j = 0; j < g.n2; ++j) {
      const Vec2 k = g.k(i, j);
      const cplx v = profile.values[g.flat(i, j)];
      s += format_number(k.x) + "," + format_number(k.y) + "," + format_number(v.real()) + "," +
           format_number(v.imag()) + "\n";
    }
  }
  return s;
}

MomentumProfile read_profile_csv(const std::string& text, const Grid& grid) {
  MomentumProfile p;
  p.grid = grid;
  p.values.assign(grid.size(), cplx{0.0, 0.0});
  std::istringstream in(text);
  std::string line;
  bool header = false;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      if (line != "kx,ky,re,im") throw InputError("profile CSV header must be kx,ky,re,im");
      header = true;
      continue;
    }
    const auto f = split(line, ',');
    if (f.size() != 4) throw InputError("profile CSV rows have 4 columns");
    const double kx = parse_double(f[0]), ky = parse_double(f[1]);
    const long m1 = std::lround(kx / grid.dk1());
    const long m2 = std::lround(ky / grid.dk2());
    if (std::fabs(m1 * grid.dk1() - kx) > 1e-9 * std::max(1.0, std::fabs(kx)) ||
        std::fabs(m2 * grid.dk2() - ky) > 1e-9 * std::max(1.0, std::fabs(ky))) {
      throw InputError("profile CSV point is not on the dual grid");
    }
    p.values[grid.flat(Grid::wrap_index(m1, grid.n1), Grid::wrap_index(m2, grid.n2))] =
        cplx{parse_double(f[2]), parse_double(f[3])};
    ++rows;
  }
  if (!header) throw InputError("profile CSV has no header");
  if (rows == 0) throw InputError("profile CSV has no rows");
  p.refresh_decay();
  p.validate();
  return p;
}

std::string moment_series_csv(const MomentSeries& series, std::uint64_t seed) {
  std::string s = seed_line(seed) + "t,m2,wrap_flag\n";
  for (std::size_t i = 0; i < series.times.size(); ++i) {
    s += format_number(series.times[i]) + "," + format_number(series.values[i]) + "," +
         (series.wrap_flags[i] ? "1" : "0") + "\n";
  }
  return s;
}

std::string front_csv(const FrontProfile& front, std::uint64_t seed) {
  std::string s = seed_line(seed) + "z_lo,z_hi,measured,predicted,k0\n";
  for (const auto& r : front.rows) {
    s += format_number(r.z_lo) + "," + format_number(r.z_hi) + "," + format_number(r.measured) + "," +
         format_number(r.predicted) + "," + format_number(r.k0) + "\n";
  }
  return s;
}

std::string mask_pgm(const std::vector<char>& member, int rows, int cols, std::uint64_t seed) {
  if (member.size() != static_cast<std::size_t>(rows) * cols) throw InputError("mask size does not match");
  std::string s = "P2\n" + seed_line(seed) + std::to_string(cols) + " " + std::to_string(rows) + "\n255\n";
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) {
      s += member[static_cast<std::size_t>(i) * cols + j] ? "255" : "0";
      s += j + 1 < cols ? " " : "\n";
    }
  }
  return s;
}

// --- Packet binary -------------------------------------------------------------------------------

std::string packet_binary(const WaveField& field, std::uint64_t seed) {
  const Grid& g = field.grid;
  std::string s = "ballistic-packet 1\n";
  s += "box " + format_number(g.L1) + " " + format_number(g.L2) + "\n";
  s += "resolution " + std::to_string(g.n1) + " " + std::to_string(g.n2) + "\n";
  s += "time " + format_number(field.time) + "\n";
  s += "seed " + std::to_string(seed) + "\n";
  s += std::string("endian ") + (kHostLittle ? "little" : "big") + "\n";
  s += "data complex128 row-major\nend\n";
  s.reserve(s.size() + field.values.size() * 2 * sizeof(double));
  for (const auto& v : field.values) {
    append_bytes(s, v.real(), false);
    append_bytes(s, v.imag(), false);
  }
  return s;
}

WaveField read_packet_binary(std::string_view bytes) {
  std::size_t pos = 0;
  const auto next_line = [&]() {
    const auto nl = bytes.find('\n', pos);
    if (nl == std::string_view::npos) throw InputError("packet header is truncated");
    std::string line(bytes.substr(pos, nl - pos));
    pos = nl + 1;
    return line;
  };
  if (next_line() != "ballistic-packet 1") throw InputError("not a packet file (bad magic line)");
  Grid g;
  double time = 0.0;
  bool swap = false;
  bool have_box = false, have_res = false, have_endian = false;
  for (;;) {
    const auto line = next_line();
    if (line == "end") break;
    const auto f = split(line, ' ');
    if (f.empty()) continue;
    if (f[0] == "box" && f.size() == 3) {
      g.L1 = parse_double(f[1]);
      g.L2 = parse_double(f[2]);
      have_box = true;
    } else if (f[0] == "resolution" && f.size() == 3) {
      g.n1 = std::stoi(f[1]);
      g.n2 = std::stoi(f[2]);
      have_res = true;
    } else if (f[0] == "time" && f.size() == 2) {
      time = parse_double(f[1]);
    } else if (f[0] == "endian" && f.size() == 2) {
      if (f[1] != "little" && f[1] != "big") throw InputError("unknown endianness marker '" + f[1] + "'");
      swap = (f[1] == "little") != kHostLittle;
      have_endian = true;
    } else if (f[0] == "seed" || f[0] == "data") {
      continue;
    } else {
      throw InputError("unknown packet header line '" + line + "'");
    }
  }
  if (!have_box || !have_res || !have_endian) throw InputError("packet header lacks box, resolution or endian");
  g.validate();
  const std::size_t need = g.size() * 2 * sizeof(double);
  if (bytes.size() - pos != need) throw InputError("packet payload size does not match the resolution");
  WaveField f(g);
  f.time = time;
  const char* p = bytes.data() + pos;
  for (std::size_t c = 0; c < g.size(); ++c) {
    const double re = read_bytes(p, swap);
    const double im = read_bytes(p + sizeof(double), swap);
    f.values[c] = cplx{re, im};
    p += 2 * sizeof(double);
  }
  return f;
}

}  // namespace ballistic
