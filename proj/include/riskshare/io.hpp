#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"
#include "riskshare/allocation.hpp"
#include "riskshare/csv.hpp"
#include "riskshare/dynrisk.hpp"
#include "riskshare/paretosolve.hpp"
#include "riskshare/scenario.hpp"

namespace riskshare {

using nlohmann::json;

DistortionFn distortion_from_json(const json& j);
json distortion_to_json(const DistortionFn& k);
/// A distortion or `{"sup": [...]}`.
DistortionSet distortion_set_from_json(const json& j);
json distortion_set_to_json(const DistortionSet& ks);

RiskSpec risk_spec_from_json(const json& j);
json risk_spec_to_json(const RiskSpec& spec);

ScenarioTree tree_from_json(const json& j);
/// `{"horizon": T, "S": [[...]], "weights": [...], "X": [[[...]]], "O": [[...]]}`.
SamplePathSet paths_from_json(const json& j);

void write_paths_csv(std::ostream& out, const SamplePathSet& paths);

void write_allocation_csv(std::ostream& out, const AllocationProcess& alloc);
AllocationProcess read_allocation_csv(const CsvTable& table, const PathSetPtr& paths);

json retention_to_json(const RetentionSchedule& sched);
RetentionSchedule retention_from_json(const json& j);

json report_to_json(const SolveReport& rep);

json load_json_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace riskshare
