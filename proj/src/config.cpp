#include "s2st/config.hpp"

#include <functional>
#include <map>
#include <string>

#include "s2st/error.hpp"

namespace s2st {
namespace {

using nlohmann::json;

// Field table shared by to_json and from_json so the two stay in sync.
struct Field {
  std::function<json(const TrainConfig&)> get;
  std::function<void(TrainConfig&, const json&)> set;
};

template <class T>
Field field(T TrainConfig::*member) {
  return {[member](const TrainConfig& c) { return json(c.*member); },
          [member](TrainConfig& c, const json& v) { c.*member = v.get<T>(); }};
}

bool type_matches(const json& fallback, const json& v) {
  if (fallback.is_boolean()) return v.is_boolean();
  if (fallback.is_number_unsigned()) return v.is_number_unsigned();
  if (fallback.is_number_integer()) return v.is_number_integer();
  if (fallback.is_number_float()) return v.is_number();
  if (fallback.is_array()) {
    if (!v.is_array()) return false;
    for (const auto& e : v) {
      if (!e.is_number_integer()) return false;
    }
    return true;
  }
  return false;
}

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> f{
      {"seed", field(&TrainConfig::seed)},
      {"K", field(&TrainConfig::K)},
      {"D", field(&TrainConfig::D)},
      {"d1", field(&TrainConfig::d1)},
      {"d2", field(&TrainConfig::d2)},
      {"d3", field(&TrainConfig::d3)},
      {"vocab_size", field(&TrainConfig::vocab_size)},
      {"init_scale", field(&TrainConfig::init_scale)},
      {"hsmm_lr", field(&TrainConfig::hsmm_lr)},
      {"hsmm_batch", field(&TrainConfig::hsmm_batch)},
      {"hsmm_max_epochs", field(&TrainConfig::hsmm_max_epochs)},
      {"demote_long_spans", field(&TrainConfig::demote_long_spans)},
      {"gen_lr", field(&TrainConfig::gen_lr)},
      {"gen_batch", field(&TrainConfig::gen_batch)},
      {"gen_max_epochs", field(&TrainConfig::gen_max_epochs)},
      {"disc_lr", field(&TrainConfig::disc_lr)},
      {"disc_batch", field(&TrainConfig::disc_batch)},
      {"disc_windows", field(&TrainConfig::disc_windows)},
      {"disc_filters", field(&TrainConfig::disc_filters)},
      {"disc_hidden", field(&TrainConfig::disc_hidden)},
      {"disc_pretrain_epochs", field(&TrainConfig::disc_pretrain_epochs)},
      {"patience", field(&TrainConfig::patience)},
      {"rel_tol", field(&TrainConfig::rel_tol)},
      {"val_fraction", field(&TrainConfig::val_fraction)},
      {"adv_epochs", field(&TrainConfig::adv_epochs)},
      {"adv_iters_per_epoch", field(&TrainConfig::adv_iters_per_epoch)},
      {"g_steps", field(&TrainConfig::g_steps)},
      {"d_steps", field(&TrainConfig::d_steps)},
      {"rollouts", field(&TrainConfig::rollouts)},
      {"top_k", field(&TrainConfig::top_k)},
      {"beam_width", field(&TrainConfig::beam_width)},
  };
  return f;
}

void require(bool ok, const std::string& what) {
  if (!ok) throw InvalidConfig("invalid config: " + what);
}

}  // namespace

TrainConfig TrainConfig::paper_scale() {
  TrainConfig c;
  c.K = 50;
  c.D = 4;
  c.d1 = 600;
  c.d2 = 300;
  c.d3 = 300;
  return c;
}

void TrainConfig::validate() const {
  require(K >= 2, "K must be >= 2");
  require(D >= 1, "D must be >= 1");
  require(d1 >= 1 && d2 >= 1 && d3 >= 1, "dimensions must be positive");
  require(vocab_size >= 1, "vocab_size must be positive");
  require(init_scale > 0, "init_scale must be positive");
  require(hsmm_lr > 0 && gen_lr > 0 && disc_lr > 0, "learning rates must be positive");
  require(hsmm_batch >= 1 && gen_batch >= 1 && disc_batch >= 1,
          "batch sizes must be positive");
  require(hsmm_max_epochs >= 0 && gen_max_epochs >= 0 && adv_epochs >= 0 &&
              disc_pretrain_epochs >= 0,
          "epoch budgets must be non-negative");
  require(!disc_windows.empty(), "disc_windows must be non-empty");
  for (int w : disc_windows) require(w >= 1, "window sizes must be positive");
  require(disc_filters >= 1 && disc_hidden >= 1, "discriminator sizes must be positive");
  require(patience >= 1, "patience must be >= 1");
  require(rel_tol >= 0, "rel_tol must be non-negative");
  require(val_fraction >= 0 && val_fraction < 1, "val_fraction must be in [0, 1)");
  require(adv_iters_per_epoch >= 0, "adv_iters_per_epoch must be non-negative");
  require(g_steps >= 0 && d_steps >= 0, "g_steps and d_steps must be non-negative");
  require(rollouts >= 1, "rollouts must be >= 1");
  require(top_k >= 1, "top_k must be >= 1");
  require(beam_width >= 1, "beam_width must be >= 1");
}

void TrainConfig::validate_for_vocab(int vocab) const {
  validate();
  require(top_k <= vocab, "top_k (" + std::to_string(top_k) +
                              ") exceeds vocabulary size (" + std::to_string(vocab) + ")");
}

nlohmann::json TrainConfig::to_json() const {
  json j = json::object();
  for (const auto& [name, f] : fields()) j[name] = f.get(*this);
  return j;
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw InvalidConfig("invalid config: expected a JSON object");
  TrainConfig c;
  const json defaults = c.to_json();
  for (const auto& [key, value] : j.items()) {
    auto it = fields().find(key);
    if (it == fields().end()) throw InvalidConfig("invalid config: unknown key \"" + key + "\"");
    if (!type_matches(defaults.at(key), value)) {
      throw InvalidConfig("invalid config: wrong type for \"" + key + "\"");
    }
    it->second.set(c, value);
  }
  c.validate();
  return c;
}

}  // namespace s2st
