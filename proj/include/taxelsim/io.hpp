#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "taxelsim/core.hpp"

namespace taxelsim {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Problem with a scene document. Syntax errors carry a 1-based line/column,
/// schema errors a field path, validation errors the core violation list.
class SceneError : public std::runtime_error {
 public:
  enum class Kind { Syntax, Schema, Validation };

  SceneError(Kind kind, const std::string& what, std::string path = {}, std::size_t line = 0,
             std::size_t column = 0, std::vector<Violation> violations = {});

  Kind kind() const { return kind_; }
  const std::string& path() const { return path_; }
  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }
  const std::vector<Violation>& violations() const { return violations_; }

 private:
  Kind kind_;
  std::string path_;
  std::size_t line_;
  std::size_t column_;
  std::vector<Violation> violations_;
};

/// JSON text -> validated World. Compact grid patches are expanded row-major.
World parse_scene(std::string_view text);

/// Same as parse_scene but stops short of validate_world.
World parse_scene_unvalidated(std::string_view text);

/// World -> JSON text (taxels always written out explicitly).
std::string serialize_scene(const World& world);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);

World load_scene(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Traces

class TraceFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class TraceFormat { Binary, Csv };

inline constexpr std::uint32_t kTraceVersion = 1;

void write_trace(const Trace& trace, std::ostream& out, TraceFormat format);
std::string encode_trace(const Trace& trace, TraceFormat format);

/// Detects the format from the leading bytes.
Trace read_trace(std::istream& in);
Trace decode_trace(std::string_view bytes);

void write_trace_file(const Trace& trace, const std::filesystem::path& path, TraceFormat format);
Trace read_trace_file(const std::filesystem::path& path);

/// Csv for a ".csv" extension, Binary otherwise.
TraceFormat format_for_path(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Heat maps

struct MinMaxScaling {};
struct FixedScaling {
  double lo = 0.0;
  double hi = 1.0;
};
using HeatmapScaling = std::variant<MinMaxScaling, FixedScaling>;

/// Binary PGM (P5, maxval 255), width = cols, height = rows. Grid cells with
/// no taxel are black.
std::vector<std::uint8_t> export_heatmap(const SignalFrame& frame, const SkinPatch& patch,
                                         const HeatmapScaling& scaling = MinMaxScaling{});

}  // namespace taxelsim
