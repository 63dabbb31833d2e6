#include "countlab/checkpoint.hpp"

#include <json.hpp>

#include "countlab/errors.hpp"
#include "countlab/file_util.hpp"

namespace countlab::training {

namespace {

using json = nlohmann::ordered_json;

json params_json(const ParamSet& p) {
  json out = json::object();
  const auto values = p.values();
  for (const auto& blk : p.layout()) {
    out[blk.name] = std::vector<double>(values.begin() + blk.offset,
                                        values.begin() + blk.offset + blk.size);
  }
  return out;
}

void fill_params(const json& j, ParamSet& p) {
  auto values = p.values();
  for (const auto& blk : p.layout()) {
    const auto arr = j.at(blk.name).get<std::vector<double>>();
    if (arr.size() != blk.size) {
      throw DataError("checkpoint array " + blk.name + " has " + std::to_string(arr.size()) +
                      " entries, expected " + std::to_string(blk.size));
    }
    std::copy(arr.begin(), arr.end(), values.begin() + blk.offset);
  }
}

ParamSet params_from(const json& j, cells::CellKind kind, int hidden,
                     cells::OutputActivation act) {
  ParamSet p(kind, hidden, act);
  fill_params(j, p);
  return p;
}

}  // namespace

std::string checkpoint_to_json(const Checkpoint& ckpt) {
  const auto& p = ckpt.params;
  json j;
  j["kind"] = cells::to_string(p.kind());
  j["hidden"] = p.hidden();
  j["outputActivation"] = cells::to_string(p.output_activation());
  j["params"] = params_json(p);
  j["seed"] = ckpt.seed;
  j["epoch"] = ckpt.epoch;
  j["runId"] = ckpt.run_id;
  j["metrics"] = {{"trainLoss", ckpt.train_loss}, {"valLoss", ckpt.val_loss}};
  if (ckpt.resume) {
    const auto& r = *ckpt.resume;
    json hist = json::array();
    for (const auto& e : r.history) hist.push_back({e.epoch, e.train_loss, e.val_loss});
    j["resume"] = {
        {"adam", {{"t", r.opt.t}, {"m", r.opt.m}, {"v", r.opt.v}}},
        {"history", hist},
        {"bestEpoch", r.best_epoch},
        {"bestValLoss", r.best_val_loss},
        {"bestParams", params_json(r.best_params)},
    };
  }
  return j.dump(1) + "\n";
}

Checkpoint checkpoint_from_json(const std::string& text) {
  try {
    const auto j = json::parse(text);
    const auto kind = cells::kind_from_string(j.at("kind").get<std::string>());
    const int hidden = j.at("hidden").get<int>();
    const auto act = cells::activation_from_string(j.at("outputActivation").get<std::string>());
    Checkpoint ckpt{params_from(j.at("params"), kind, hidden, act), 0, 0, {}, 0.0, 0.0, std::nullopt};
    ckpt.seed = j.at("seed").get<std::uint64_t>();
    ckpt.epoch = j.at("epoch").get<int>();
    ckpt.run_id = j.at("runId").get<std::string>();
    ckpt.train_loss = j.at("metrics").at("trainLoss").get<double>();
    ckpt.val_loss = j.at("metrics").at("valLoss").get<double>();
    if (j.contains("resume")) {
      const auto& r = j.at("resume");
      ResumeState rs{OptState{}, {}, 0, 0.0,
                     params_from(r.at("bestParams"), kind, hidden, act)};
      rs.opt.t = r.at("adam").at("t").get<std::uint64_t>();
      rs.opt.m = r.at("adam").at("m").get<std::vector<double>>();
      rs.opt.v = r.at("adam").at("v").get<std::vector<double>>();
      if (rs.opt.m.size() != ckpt.params.size() || rs.opt.v.size() != ckpt.params.size())
        throw DataError("checkpoint optimizer state does not match parameter count");
      for (const auto& e : r.at("history")) {
        rs.history.push_back({e.at(0).get<int>(), e.at(1).get<double>(), e.at(2).get<double>()});
      }
      rs.best_epoch = r.at("bestEpoch").get<int>();
      rs.best_val_loss = r.at("bestValLoss").get<double>();
      ckpt.resume = std::move(rs);
    }
    return ckpt;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed checkpoint: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw DataError(std::string("malformed checkpoint: ") + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  write_file_atomic(path, checkpoint_to_json(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  try {
    return checkpoint_from_json(read_file(path));
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::filesystem::path epoch_checkpoint_path(const std::filesystem::path& run_dir, int epoch) {
  return run_dir / ("epoch" + std::to_string(epoch) + ".ckpt.json");
}

std::filesystem::path best_checkpoint_path(const std::filesystem::path& run_dir) {
  return run_dir / "best.ckpt.json";
}

std::filesystem::path metrics_path(const std::filesystem::path& run_dir) {
  return run_dir / "metrics.csv";
}

}  // namespace countlab::training
