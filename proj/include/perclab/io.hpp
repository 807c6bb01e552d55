#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "perclab/estimate.hpp"

namespace perclab {

using json = nlohmann::ordered_json;

// Formatting is pinned to %.17g so reruns reproduce outputs byte for byte.
std::string format_double(double v);

// Write via a temp file and rename; no partial files on failure.
void atomic_write_text(const std::string& path, const std::string& content);

// Rejects unknown keys and missing required ones; `ctx` names the object in
// diagnostics.
void check_keys(const json& j, const std::vector<std::string>& required,
                const std::vector<std::string>& optional, const std::string& ctx);

json region_to_json(const Region& r);
Region region_from_json(const json& j);

json model_to_json(const ModelSpec& m);
ModelSpec model_from_json(const json& j, int dim);

json policy_to_json(const WindowPolicy& p);
WindowPolicy policy_from_json(const json& j);

json classification_to_json(const Classification& c);
json deff_report_to_json(const DeffReport& r);
json tail_report_to_json(const TailReport& r);
json certificate_to_json(const CertificateVerdict& v);
json mixing_to_json(const MixingResult& m);

std::string cloud_to_csv(const PointCloud& cloud);
std::string vertices_to_csv(const GraphSample& g);
std::string edges_to_csv(const GraphSample& g);
json graph_envelope(const GraphSample& g, std::uint64_t master_seed);

std::string series_to_csv(const EstimateSeries& s);
EstimateSeries series_from_csv(const std::string& text);
std::string trials_to_csv(const std::vector<TrialRecord>& trials);
std::string phase_to_csv(const PhaseGrid& grid);
std::string phase_to_svg(const PhaseGrid& grid);
std::string tail_samples_to_csv(const std::vector<std::pair<double, bool>>& samples);

}  // namespace perclab
