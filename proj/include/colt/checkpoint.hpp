#pragma once

#include <filesystem>

#include "colt/io.hpp"
#include "colt/training.hpp"

namespace colt {

json config_to_json(const TrainConfig& config);
TrainConfig config_from_json(const json& obj);

/// Checkpoint directory layout:
///   meta.json               config, pass-through flag, caller provenance
///   query_base.jsonl        e_q^(0) for train queries
///   tool_base.jsonl         e_t^(0)
///   query_scene_view.jsonl  e_q^S
///   query_tool_view.jsonl   e_q^T
///   tool_view.jsonl         e_t^T
///   scene_scene_view.jsonl, scene_tool_view.jsonl  (collaborative models only)
/// `provenance` is stored under meta["provenance"].
void save_checkpoint(const TrainedModel& model, const std::filesystem::path& dir,
                     const json& provenance);

struct Checkpoint {
  TrainedModel model;
  json meta;
};

Checkpoint load_checkpoint(const std::filesystem::path& dir);

}  // namespace colt
