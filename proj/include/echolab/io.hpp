#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "json.hpp"

#include "echolab/baseline.hpp"
#include "echolab/echo.hpp"
#include "echolab/forward.hpp"
#include "echolab/inference.hpp"
#include "echolab/pulses.hpp"
#include "echolab/skew_normal.hpp"
#include "echolab/trajectories.hpp"

namespace echolab {

using json = nlohmann::ordered_json;

/// v rounded to the output precision (9 significant digits).
double round_output(double v);

/// Serialized text with every floating-point value rounded to the output precision.
/// Non-finite values become null.
std::string dump_json(const json& j, int indent = 2);

/// Parses text; throws ValidationError on malformed JSON.
json parse_json(const std::string& text);

/// Reads a file; throws IoError if it cannot be opened and ValidationError if it is not JSON.
json read_json_file(const std::filesystem::path& path);
std::string read_text_file(const std::filesystem::path& path);
/// Writes text atomically enough for our purposes; throws IoError.
void write_text_file(const std::filesystem::path& path, const std::string& text);

// Conversions. Parsing rejects unknown keys and missing required keys with ValidationError;
// optional keys keep their defaults.

void to_json(json& j, const SkewNormalParams& p);
void from_json(const json& j, SkewNormalParams& p);

void to_json(json& j, const PulseSpec& p);
void from_json(const json& j, PulseSpec& p);

void to_json(json& j, const PulsePair& p);
void from_json(const json& j, PulsePair& p);

void to_json(json& j, const GridSpec& g);
void from_json(const json& j, GridSpec& g);

void to_json(json& j, const Dataset& d);
void from_json(const json& j, Dataset& d);

void to_json(json& j, const FitBounds& b);
void from_json(const json& j, FitBounds& b);

void to_json(json& j, const FitConfig& c);
void from_json(const json& j, FitConfig& c);

void to_json(json& j, const FitResult& r);
void from_json(const json& j, FitResult& r);

/// Summary table: one row per parameter with mean and standard deviation.
json multi_fit_summary(const MultiFitResult& result);
/// Averaged parameters from a summary produced by multi_fit_summary.
SkewNormalParams summary_mean_params(const json& summary);

void to_json(json& j, const LatticeConfig& c);
void from_json(const json& j, LatticeConfig& c);

void to_json(json& j, const WindowSpec& w);
void from_json(const json& j, WindowSpec& w);

void to_json(json& j, const PlateauOptions& o);
void from_json(const json& j, PlateauOptions& o);

void to_json(json& j, const PlateauReport& r);

void to_json(json& j, const EchoCurve& c);

void to_json(json& j, const TrajectoryCensus& c);

void to_json(json& j, const HoleWidthCurve& c);

/// CSV rows delay_ms,pump_khz,probe_khz,value for the three dataset grids.
void write_dataset_csv(std::ostream& os, const Dataset& d);
/// CSV rows node,freq_khz,value for the probe-alone spectra.
void write_probe_alone_csv(std::ostream& os, const Dataset& d);

}  // namespace echolab
