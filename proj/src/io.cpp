#include "hsdemosaic/io.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "hsdemosaic/error.hpp"

namespace hsd::io {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void write_f32le(std::span<const float> values, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(values.data()), static_cast<std::streamsize>(values.size_bytes()));
  } else {
    for (float v : values) {
      auto bits = __builtin_bswap32(std::bit_cast<std::uint32_t>(v));
      out.write(reinterpret_cast<const char*>(&bits), sizeof bits);
    }
  }
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

std::vector<float> read_f32le(const fs::path& path, std::size_t count) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::vector<float> values(count);
  in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(count * sizeof(float)));
  if (static_cast<std::size_t>(in.gcount()) != count * sizeof(float)) {
    throw Error(ErrorCode::IoError, path.string() + " is shorter than its sidecar declares");
  }
  if constexpr (std::endian::native != std::endian::little) {
    for (float& v : values) v = std::bit_cast<float>(__builtin_bswap32(std::bit_cast<std::uint32_t>(v)));
  }
  return values;
}

json raw_header(int width, int height, int bands, const std::vector<double>& wavelengths) {
  return json{{"width", width},        {"height", height},       {"bands", bands},
              {"wavelengths_nm", wavelengths}, {"layout", "band-major"}, {"dtype", "f32le"}};
}

void check_raw_header(const json& j, const fs::path& path) {
  if (j.value("layout", "band-major") != "band-major" || j.value("dtype", "f32le") != "f32le") {
    throw Error(ErrorCode::IoError, path.string() + ": only band-major f32le payloads are supported");
  }
}

}  // namespace

fs::path sidecar_path(const fs::path& raw) { return fs::path(raw.string() + ".json"); }

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::IoError, path.string() + ": " + e.what());
  }
}

void write_json(const json& j, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
  out << j.dump(2) << '\n';
}

json pattern_to_json(const MosaicPattern& pattern, Phase phase) {
  json grid = json::array();
  for (int r = 0; r < pattern.rows; ++r) {
    json row = json::array();
    for (int c = 0; c < pattern.cols; ++c) row.push_back(pattern.band(r, c));
    grid.push_back(row);
  }
  return json{{"rows", pattern.rows},
              {"cols", pattern.cols},
              {"band_at", grid},
              {"wavelengths_nm", pattern.wavelengths_nm},
              {"phase", {phase.row, phase.col}}};
}

MosaicPattern pattern_from_json(const json& j) {
  try {
    MosaicPattern p;
    p.rows = j.at("rows").get<int>();
    p.cols = j.at("cols").get<int>();
    p.band_at.clear();
    for (const auto& row : j.at("band_at")) {
      if (row.size() != static_cast<std::size_t>(p.cols)) {
        throw Error(ErrorCode::InvalidPattern, "band_at row length differs from cols");
      }
      for (const auto& v : row) p.band_at.push_back(v.get<int>());
    }
    if (j.contains("wavelengths_nm")) {
      p.wavelengths_nm = j.at("wavelengths_nm").get<std::vector<double>>();
    } else {
      p.wavelengths_nm = MosaicPattern::standard(p.rows).wavelengths_nm;
    }
    p.validate();
    return p;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidPattern, e.what());
  }
}

Phase phase_from_json(const json& j) {
  if (!j.contains("phase")) return {};
  const auto& ph = j.at("phase");
  return Phase{ph.at(0).get<int>(), ph.at(1).get<int>()};
}

void write_cube(const HyperCube& cube, const fs::path& path) {
  write_f32le(cube.data, path);
  write_json(raw_header(cube.width, cube.height, cube.bands, cube.wavelengths_nm), sidecar_path(path));
}

HyperCube read_cube(const fs::path& path) {
  const json j = read_json(sidecar_path(path));
  check_raw_header(j, path);
  try {
    HyperCube cube;
    cube.width = j.at("width").get<int>();
    cube.height = j.at("height").get<int>();
    cube.bands = j.at("bands").get<int>();
    cube.wavelengths_nm = j.value("wavelengths_nm", std::vector<double>{});
    if (cube.width <= 0 || cube.height <= 0 || cube.bands <= 0) {
      throw Error(ErrorCode::IoError, path.string() + ": non-positive dimensions");
    }
    cube.data = read_f32le(path, static_cast<std::size_t>(cube.width) * cube.height * cube.bands);
    return cube;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::IoError, path.string() + ": " + e.what());
  }
}

void write_mosaic(const MosaicImage& mi, const fs::path& path) {
  write_f32le(mi.data, path);
  json j = raw_header(mi.width, mi.height, 1, mi.pattern.wavelengths_nm);
  j.update(pattern_to_json(mi.pattern, mi.phase));
  write_json(j, sidecar_path(path));
}

MosaicImage read_mosaic(const fs::path& path) {
  const json j = read_json(sidecar_path(path));
  check_raw_header(j, path);
  try {
    if (j.value("bands", 1) != 1) throw Error(ErrorCode::IoError, path.string() + ": mosaic must have bands = 1");
    MosaicImage mi;
    mi.pattern = pattern_from_json(j);
    mi.phase = phase_from_json(j);
    mi.width = j.at("width").get<int>();
    mi.height = j.at("height").get<int>();
    if (mi.width <= 0 || mi.height <= 0) throw Error(ErrorCode::IoError, path.string() + ": non-positive dimensions");
    mi.data = read_f32le(path, static_cast<std::size_t>(mi.width) * mi.height);
    return mi;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::IoError, path.string() + ": " + e.what());
  }
}

namespace {

// Reads one PNM header token, skipping whitespace and comments.
std::string pnm_token(std::istream& in) {
  std::string tok;
  char ch = 0;
  while (in.get(ch)) {
    if (ch == '#') {
      std::string skip;
      std::getline(in, skip);
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(ch))) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(ch);
  }
  return tok;
}

}  // namespace

MosaicImage read_pgm16(const fs::path& path, const MosaicPattern& pattern) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  if (pnm_token(in) != "P5") throw Error(ErrorCode::IoError, path.string() + ": not a binary PGM");
  int width = 0, height = 0, maxval = 0;
  try {
    width = std::stoi(pnm_token(in));
    height = std::stoi(pnm_token(in));
    maxval = std::stoi(pnm_token(in));
  } catch (const std::exception&) {
    throw Error(ErrorCode::IoError, path.string() + ": malformed PGM header");
  }
  if (width <= 0 || height <= 0 || maxval <= 0 || maxval > 65535) {
    throw Error(ErrorCode::IoError, path.string() + ": unsupported PGM header");
  }
  MosaicImage mi(width, height, pattern);
  const bool wide = maxval > 255;
  std::vector<unsigned char> bytes(static_cast<std::size_t>(width) * height * (wide ? 2 : 1));
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (static_cast<std::size_t>(in.gcount()) != bytes.size()) throw Error(ErrorCode::IoError, path.string() + ": truncated");
  // 16-bit files use the full 16-bit scale; 8-bit files their own maxval.
  const double scale = wide ? 65535.0 : maxval;
  for (std::size_t i = 0; i < mi.data.size(); ++i) {
    const unsigned v = wide ? (static_cast<unsigned>(bytes[2 * i]) << 8) | bytes[2 * i + 1] : bytes[i];
    mi.data[i] = static_cast<float>(static_cast<double>(v) / scale);
  }
  return mi;
}

void write_pgm16(std::span<const float> plane, int width, int height, const fs::path& path) {
  if (plane.size() != static_cast<std::size_t>(width) * height) {
    throw Error(ErrorCode::ShapeMismatch, "plane size does not match PGM dimensions");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
  out << "P5\n" << width << ' ' << height << "\n65535\n";
  std::vector<unsigned char> bytes(plane.size() * 2);
  for (std::size_t i = 0; i < plane.size(); ++i) {
    const double v = std::clamp(static_cast<double>(plane[i]), 0.0, 1.0);
    const auto q = static_cast<unsigned>(std::lround(v * 65535.0));
    bytes[2 * i] = static_cast<unsigned char>(q >> 8);
    bytes[2 * i + 1] = static_cast<unsigned char>(q & 0xffu);
  }
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

MosaicImage read_mosaic_any(const fs::path& path, const MosaicPattern& fallback_pattern) {
  if (path.extension() == ".pgm") return read_pgm16(path, fallback_pattern);
  return read_mosaic(path);
}

}  // namespace hsd::io
