#include "colt/checkpoint.hpp"

#include "colt/error.hpp"

namespace colt {

namespace fs = std::filesystem;

json config_to_json(const TrainConfig& c) {
  return {{"learning_rate", c.learning_rate},
          {"weight_decay", c.weight_decay},
          {"layers", c.layers},
          {"lambda", c.lambda},
          {"temperature", c.temperature},
          {"list_length", c.list_length},
          {"batch_size", c.batch_size},
          {"epochs", c.epochs},
          {"seed", c.seed},
          {"beta1", c.beta1},
          {"beta2", c.beta2},
          {"epsilon", c.epsilon},
          {"collaborative", c.collaborative},
          {"ranking_loss", c.ranking_loss == RankingLoss::kListwise ? "listwise" : "pairwise"}};
}

TrainConfig config_from_json(const json& obj) {
  TrainConfig c;
  try {
    c.learning_rate = obj.at("learning_rate").get<double>();
    c.weight_decay = obj.at("weight_decay").get<double>();
    c.layers = obj.at("layers").get<int>();
    c.lambda = obj.at("lambda").get<double>();
    c.temperature = obj.at("temperature").get<double>();
    c.list_length = obj.at("list_length").get<std::size_t>();
    c.batch_size = obj.at("batch_size").get<std::size_t>();
    c.epochs = obj.at("epochs").get<int>();
    c.seed = obj.at("seed").get<std::uint64_t>();
    c.beta1 = obj.at("beta1").get<double>();
    c.beta2 = obj.at("beta2").get<double>();
    c.epsilon = obj.at("epsilon").get<double>();
    c.collaborative = obj.at("collaborative").get<bool>();
    c.ranking_loss =
        obj.at("ranking_loss").get<std::string>() == "pairwise" ? RankingLoss::kPairwise : RankingLoss::kListwise;
  } catch (const json::exception& e) {
    throw DataError(std::string("bad config in checkpoint meta: ") + e.what());
  }
  return c;
}

void save_checkpoint(const TrainedModel& model, const fs::path& dir, const json& provenance) {
  fs::create_directories(dir);
  save_embeddings(model.query_base, dir / "query_base.jsonl");
  save_embeddings(model.tool_base, dir / "tool_base.jsonl");
  save_embeddings(model.query_scene_view, dir / "query_scene_view.jsonl");
  save_embeddings(model.query_tool_view, dir / "query_tool_view.jsonl");
  save_embeddings(model.tool_view, dir / "tool_view.jsonl");
  if (!model.pass_through) {
    save_embeddings(model.scene_scene_view, dir / "scene_scene_view.jsonl");
    save_embeddings(model.scene_tool_view, dir / "scene_tool_view.jsonl");
  }
  json meta = {{"format", "colt-checkpoint/1"},
               {"config", config_to_json(model.config)},
               {"pass_through", model.pass_through},
               {"dim", model.tool_view.dim()},
               {"train_queries", model.query_base.size()},
               {"tools", model.tool_base.size()},
               {"provenance", provenance}};
  write_file_atomic(dir / "meta.json", meta.dump(2) + "\n");
}

Checkpoint load_checkpoint(const fs::path& dir) {
  Checkpoint ck;
  try {
    ck.meta = json::parse(read_file(dir / "meta.json"));
  } catch (const json::parse_error& e) {
    throw DataError((dir / "meta.json").string() + ": " + e.what());
  }
  if (ck.meta.value("format", "") != "colt-checkpoint/1") {
    throw DataError(dir.string() + ": not a checkpoint directory");
  }
  TrainedModel& m = ck.model;
  m.config = config_from_json(ck.meta.at("config"));
  m.pass_through = ck.meta.value("pass_through", false);
  m.query_base = load_embeddings(dir / "query_base.jsonl");
  m.tool_base = load_embeddings(dir / "tool_base.jsonl");
  m.query_scene_view = load_embeddings(dir / "query_scene_view.jsonl");
  m.query_tool_view = load_embeddings(dir / "query_tool_view.jsonl");
  m.tool_view = load_embeddings(dir / "tool_view.jsonl");
  if (!m.pass_through) {
    m.scene_scene_view = load_embeddings(dir / "scene_scene_view.jsonl");
    m.scene_tool_view = load_embeddings(dir / "scene_tool_view.jsonl");
  }
  return ck;
}

}  // namespace colt
