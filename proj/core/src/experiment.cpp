#include "countlab/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include <json.hpp>

#include "countlab/errors.hpp"
#include "countlab/file_util.hpp"
#include "countlab/random.hpp"

namespace countlab::experiment {

namespace {

using json = nlohmann::ordered_json;

Campaign default_campaign(CellKind kind) {
  Campaign c;
  c.train.kind = kind;
  c.train.lr = training::default_learning_rate(kind);
  c.train.epochs = 30;
  c.runs = kind == CellKind::Relu ? 30 : 10;
  c.select = 10;
  return c;
}

std::uint64_t split_tag(dyck::SplitName name) { return static_cast<std::uint64_t>(name) + 1; }

void read_gen(const json& j, dyck::GenSpec& spec) {
  if (j.contains("count")) spec.count = j.at("count").get<std::size_t>();
  if (j.contains("minLen")) spec.min_len = j.at("minLen").get<std::size_t>();
  if (j.contains("maxLen")) spec.max_len = j.at("maxLen").get<std::size_t>();
  if (j.contains("pcfgP")) spec.pcfg_p = j.at("pcfgP").get<double>();
  if (j.contains("pcfgQ")) spec.pcfg_q = j.at("pcfgQ").get<double>();
}

json gen_json(const dyck::GenSpec& s) {
  return {{"count", s.count}, {"minLen", s.min_len}, {"maxLen", s.max_len},
          {"pcfgP", s.pcfg_p}, {"pcfgQ", s.pcfg_q}};
}

// Fields shared by all kinds under "training", overridable per kind.
void read_train(const json& j, training::TrainConfig& t) {
  if (j.contains("hidden")) t.hidden = j.at("hidden").get<int>();
  if (j.contains("lr")) t.lr = j.at("lr").get<double>();
  if (j.contains("epochs")) t.epochs = j.at("epochs").get<int>();
  if (j.contains("checkpointEpochs"))
    t.checkpoint_epochs = j.at("checkpointEpochs").get<std::vector<int>>();
  if (j.contains("loss")) t.loss = training::loss_from_string(j.at("loss").get<std::string>());
  if (j.contains("outputActivation"))
    t.output_activation =
        cells::activation_from_string(j.at("outputActivation").get<std::string>());
  if (j.contains("adam")) {
    const auto& a = j.at("adam");
    if (a.contains("beta1")) t.adam.beta1 = a.at("beta1").get<double>();
    if (a.contains("beta2")) t.adam.beta2 = a.at("beta2").get<double>();
    if (a.contains("eps")) t.adam.eps = a.at("eps").get<double>();
  }
}

}  // namespace

std::string run_id(CellKind kind, std::size_t run) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%02zu", run);
  return cells::to_string(kind) + "-" + buf;
}

ExperimentConfig default_config() {
  ExperimentConfig c;
  for (CellKind k : c.kinds) c.campaigns.push_back(default_campaign(k));
  return c;
}

void ExperimentConfig::validate() const {
  try {
    for (const auto* s : {&train, &validation, &long_test, &very_long}) s->validate();
    dyck::zigzag_split(zigzag_js, zigzag_len);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  if (kinds.empty()) throw ConfigError("no cell kinds selected");
  if (campaigns.size() != kinds.size()) throw ConfigError("one campaign per kind is required");
  for (std::size_t i = 0; i < kinds.size(); ++i) {
    const auto& c = campaigns[i];
    if (c.train.kind != kinds[i]) throw ConfigError("campaign order does not match kinds");
    try {
      c.train.validate();
    } catch (const Error& e) {
      throw ConfigError(cells::to_string(kinds[i]) + ": " + e.what());
    }
    if (c.runs == 0 || c.select == 0 || c.select > c.runs)
      throw ConfigError(cells::to_string(kinds[i]) + ": need 1 <= select <= runs");
  }
  if (jobs < 1) throw ConfigError("jobs must be >= 1");
  if (histogram_bin_width == 0) throw ConfigError("histogramBinWidth must be positive");
  if (delta_bucket_width < 1) throw ConfigError("deltaBucketWidth must be >= 1");
  if (!(saturation_delta > 0.0 && saturation_delta < 0.5))
    throw ConfigError("saturationDelta must lie in (0, 0.5)");
  if (std::find(zigzag_js.begin(), zigzag_js.end(), delta_j) == zigzag_js.end())
    throw ConfigError("deltaJ must be one of the zigzag js");
}

const Campaign& ExperimentConfig::campaign(CellKind kind) const {
  for (std::size_t i = 0; i < kinds.size(); ++i)
    if (kinds[i] == kind) return campaigns[i];
  throw ConfigError("kind " + cells::to_string(kind) + " is not configured");
}

dyck::GenSpec ExperimentConfig::split_spec(dyck::SplitName name) const {
  dyck::GenSpec s;
  switch (name) {
    case dyck::SplitName::Train: s = train; break;
    case dyck::SplitName::Validation: s = validation; break;
    case dyck::SplitName::Long: s = long_test; break;
    case dyck::SplitName::VeryLong: s = very_long; break;
    case dyck::SplitName::Zigzag: throw InvalidArgument("zigzag split has no generator spec");
  }
  s.seed = derive_seed(seed, split_tag(name));
  return s;
}

std::uint64_t ExperimentConfig::run_seed(CellKind kind, std::size_t run) const {
  return derive_seed(derive_seed(seed, 100 + static_cast<std::uint64_t>(kind)), run);
}

std::filesystem::path ExperimentConfig::runs_dir(CellKind kind) const {
  return out_dir / "runs" / cells::to_string(kind);
}

ExperimentConfig config_from_json(const std::string& text) {
  ExperimentConfig c = default_config();
  try {
    const auto j = json::parse(text, nullptr, true, /*ignore_comments=*/true);
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("outDir")) c.out_dir = j.at("outDir").get<std::string>();
    if (j.contains("jobs")) c.jobs = j.at("jobs").get<int>();

    if (j.contains("datasets")) {
      const auto& d = j.at("datasets");
      for (auto* s : {&c.train, &c.validation, &c.long_test, &c.very_long}) read_gen(d, *s);
      if (d.contains("train")) read_gen(d.at("train"), c.train);
      if (d.contains("validation")) read_gen(d.at("validation"), c.validation);
      if (d.contains("long")) read_gen(d.at("long"), c.long_test);
      if (d.contains("veryLong")) read_gen(d.at("veryLong"), c.very_long);
      if (d.contains("zigzag")) {
        const auto& z = d.at("zigzag");
        if (z.contains("js")) c.zigzag_js = z.at("js").get<std::vector<std::size_t>>();
        if (z.contains("totalLen")) c.zigzag_len = z.at("totalLen").get<std::size_t>();
      }
    }

    if (j.contains("training")) {
      const auto& t = j.at("training");
      if (t.contains("kinds")) {
        c.kinds.clear();
        for (const auto& k : t.at("kinds")) c.kinds.push_back(cells::kind_from_string(k.get<std::string>()));
      }
      c.campaigns.clear();
      for (CellKind k : c.kinds) {
        Campaign camp = default_campaign(k);
        read_train(t, camp.train);
        const auto name = cells::to_string(k);
        if (t.contains("runs")) camp.runs = t.at("runs").get<std::size_t>();
        if (t.contains("select")) camp.select = t.at("select").get<std::size_t>();
        if (t.contains(name)) {
          const auto& kj = t.at(name);
          read_train(kj, camp.train);
          if (kj.contains("runs")) camp.runs = kj.at("runs").get<std::size_t>();
          if (kj.contains("select")) camp.select = kj.at("select").get<std::size_t>();
        }
        c.campaigns.push_back(std::move(camp));
      }
    }

    if (j.contains("analysis")) {
      const auto& a = j.at("analysis");
      if (a.contains("histogramBinWidth")) c.histogram_bin_width = a.at("histogramBinWidth").get<std::size_t>();
      if (a.contains("deltaJ")) c.delta_j = a.at("deltaJ").get<std::size_t>();
      if (a.contains("deltaBucketWidth")) c.delta_bucket_width = a.at("deltaBucketWidth").get<int>();
      if (a.contains("saturationDelta")) c.saturation_delta = a.at("saturationDelta").get<double>();
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const DataError&) {
    throw ConfigError("cannot read config file " + path.string());
  }
  return config_from_json(text);
}

std::string config_to_json(const ExperimentConfig& c) {
  json j;
  j["seed"] = c.seed;
  j["outDir"] = c.out_dir.string();
  j["jobs"] = c.jobs;
  j["datasets"] = {{"train", gen_json(c.train)},
                   {"validation", gen_json(c.validation)},
                   {"long", gen_json(c.long_test)},
                   {"veryLong", gen_json(c.very_long)},
                   {"zigzag", {{"js", c.zigzag_js}, {"totalLen", c.zigzag_len}}}};
  json t;
  json kinds = json::array();
  for (CellKind k : c.kinds) kinds.push_back(cells::to_string(k));
  t["kinds"] = kinds;
  for (const auto& camp : c.campaigns) {
    const auto& tc = camp.train;
    t[cells::to_string(tc.kind)] = {
        {"hidden", tc.hidden},
        {"lr", tc.lr},
        {"epochs", tc.epochs},
        {"checkpointEpochs", tc.checkpoint_epochs},
        {"loss", training::to_string(tc.loss)},
        {"outputActivation", cells::to_string(tc.output_activation)},
        {"adam", {{"beta1", tc.adam.beta1}, {"beta2", tc.adam.beta2}, {"eps", tc.adam.eps}}},
        {"runs", camp.runs},
        {"select", camp.select}};
  }
  j["training"] = t;
  j["analysis"] = {{"histogramBinWidth", c.histogram_bin_width},
                   {"deltaJ", c.delta_j},
                   {"deltaBucketWidth", c.delta_bucket_width},
                   {"saturationDelta", c.saturation_delta}};
  return j.dump(2) + "\n";
}

void apply_overrides(ExperimentConfig& c, const Overrides& o) {
  if (o.scale) {
    if (!(*o.scale > 0.0)) throw ConfigError("--scale must be positive");
    for (auto* s : {&c.train, &c.validation, &c.long_test}) {
      s->count = std::max<std::size_t>(
          1, static_cast<std::size_t>(std::llround(static_cast<double>(s->count) * *o.scale)));
    }
  }
  if (o.kinds) {
    std::vector<Campaign> camps;
    for (CellKind k : *o.kinds) {
      auto it = std::find(c.kinds.begin(), c.kinds.end(), k);
      camps.push_back(it != c.kinds.end() ? c.campaigns[it - c.kinds.begin()] : default_campaign(k));
    }
    c.kinds = *o.kinds;
    c.campaigns = std::move(camps);
  }
  if (o.jobs) c.jobs = *o.jobs;
  if (o.seed) c.seed = *o.seed;
  if (o.out_dir) c.out_dir = *o.out_dir;
  c.validate();
}

}  // namespace countlab::experiment
