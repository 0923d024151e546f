#pragma once

#include <cstdint>
#include <filesystem>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include "ballistic/bloch.hpp"
#include "ballistic/dynamics.hpp"
#include "ballistic/grid.hpp"
#include "ballistic/nonresonant.hpp"
#include "ballistic/transform.hpp"

namespace ballistic {

// Shortest decimal that round-trips a double ("%.17g").
std::string format_number(double v);
// Lower-case hex SHA-256 of a byte string.
std::string sha256_hex(std::string_view bytes);

struct ArtifactEntry {
  std::string name;  // path relative to the output directory
  std::string sha256;
  std::uint64_t bytes{0};
};

// Writes artifacts into one directory and records their hashes. Writes are serialized; the
// manifest lists entries sorted by name so it does not depend on write order.
class ArtifactWriter {
 public:
  ArtifactWriter(std::filesystem::path directory, std::uint64_t seed);

  void write(const std::string& name, std::string_view bytes);
  // Writes manifest.json (seed, config hash and every artifact except the manifest itself).
  void write_manifest(const std::string& config_sha256, const std::string& scenario);

  [[nodiscard]] std::vector<ArtifactEntry> entries() const;
  [[nodiscard]] const std::filesystem::path& directory() const { return directory_; }
  [[nodiscard]] std::uint64_t seed() const { return seed_; }

 private:
  std::filesystem::path directory_;
  std::uint64_t seed_;
  mutable std::mutex mutex_;
  std::vector<ArtifactEntry> entries_;
};

// CSV artifacts. Every CSV starts with a "# seed=<n>" comment line followed by the header row.
// Branch table columns: kx, ky, lambda, gx, gy, weight, gap, resonant_flag.
std::string branches_csv(const std::vector<BranchResult>& results, std::uint64_t seed);
// phi, kappa, member
std::string curve_csv(const IsoenergeticCurve& curve, std::uint64_t seed);
// kx, ky, re, im (FFT order of the dual grid)
std::string profile_csv(const MomentumProfile& profile, std::uint64_t seed);
MomentumProfile read_profile_csv(const std::string& text, const Grid& grid);
// t, m2, wrap_flag
std::string moment_series_csv(const MomentSeries& series, std::uint64_t seed);
// z_lo, z_hi, measured, predicted, k0
std::string front_csv(const FrontProfile& front, std::uint64_t seed);

// Plain PGM (P2) image of a 0/1 mask: rows are the first index, 255 marks members.
std::string mask_pgm(const std::vector<char>& member, int rows, int cols, std::uint64_t seed);

// Packet binary: text header lines
//   ballistic-packet 1 / box L1 L2 / resolution n1 n2 / time t / seed s / endian little|big /
//   data complex128 row-major / end
// followed by n1 * n2 pairs of IEEE doubles (re, im) in the declared byte order.
std::string packet_binary(const WaveField& field, std::uint64_t seed);
WaveField read_packet_binary(std::string_view bytes);

}  // namespace ballistic
