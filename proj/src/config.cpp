#include "strokeshift/config.hpp"

#include <fstream>
#include <set>

#include "strokeshift/errors.hpp"
#include "strokeshift/png_io.hpp"

namespace strokeshift {

using nlohmann::json;

namespace {

void reject_unknown_keys(const json& obj, const std::string& where,
                         std::initializer_list<const char*> allowed) {
  const std::set<std::string> keys(allowed.begin(), allowed.end());
  for (const auto& item : obj.items()) {
    if (!keys.contains(item.key())) {
      throw ConfigError(where.empty() ? item.key() : where + "." + item.key(), "unknown key");
    }
  }
}

const json& require_object(const json& parent, const char* key, const std::string& where) {
  const auto it = parent.find(key);
  if (it == parent.end()) throw ConfigError(where, "missing required key");
  if (!it->is_object()) throw ConfigError(where, "must be an object");
  return *it;
}

template <typename T>
void read_field(const json& obj, const char* key, const std::string& where, T& out) {
  const auto it = obj.find(key);
  if (it == obj.end()) return;
  try {
    out = it->get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where.empty() ? key : where + "." + key, "has the wrong type");
  }
}

template <typename T>
void require_field(const json& obj, const char* key, const std::string& where, T& out) {
  if (!obj.contains(key)) throw ConfigError(where.empty() ? key : where + "." + key, "missing");
  read_field(obj, key, where, out);
}

Point2<double> read_point(const json& value, const std::string& where) {
  if (!value.is_array() || value.size() != 2 || !value[0].is_number() || !value[1].is_number()) {
    throw ConfigError(where, "must be a [x, y] pair");
  }
  return {value[0].get<double>(), value[1].get<double>()};
}

json point_json(const Point2<double>& p) { return json::array({p.x(), p.y()}); }

TargetShape parse_shape(const json& doc, const std::string& where) {
  if (!doc.is_object()) throw ConfigError(where, "must be an object");
  TargetShape shape;
  std::string type;
  require_field(doc, "type", where, type);
  if (type == "disk") {
    reject_unknown_keys(doc, where, {"type", "center", "radius"});
    shape.kind = TargetShape::Kind::disk;
    if (!doc.contains("center")) throw ConfigError(where + ".center", "missing");
    shape.center = read_point(doc["center"], where + ".center");
    require_field(doc, "radius", where, shape.radius);
    if (!(shape.radius > 0.0)) throw ConfigError(where + ".radius", "must be > 0");
  } else if (type == "triangle") {
    reject_unknown_keys(doc, where, {"type", "vertices"});
    shape.kind = TargetShape::Kind::triangle;
    const auto it = doc.find("vertices");
    if (it == doc.end() || !it->is_array() || it->size() != 3) {
      throw ConfigError(where + ".vertices", "must list three [x, y] points");
    }
    for (std::size_t i = 0; i < 3; ++i) {
      shape.vertices[i] = read_point((*it)[i], where + ".vertices[" + std::to_string(i) + "]");
    }
  } else if (type == "png") {
    reject_unknown_keys(doc, where, {"type", "path"});
    shape.kind = TargetShape::Kind::png;
    require_field(doc, "path", where, shape.path);
  } else {
    throw ConfigError(where + ".type", "unknown shape type '" + type + "'");
  }
  return shape;
}

json shape_json(const TargetShape& shape) {
  switch (shape.kind) {
    case TargetShape::Kind::disk:
      return {{"type", "disk"}, {"center", point_json(shape.center)}, {"radius", shape.radius}};
    case TargetShape::Kind::triangle:
      return {{"type", "triangle"},
              {"vertices", json::array({point_json(shape.vertices[0]),
                                        point_json(shape.vertices[1]),
                                        point_json(shape.vertices[2])})}};
    case TargetShape::Kind::png:
      return {{"type", "png"}, {"path", shape.path}};
  }
  return {};
}

void parse_render(const json& doc, RenderConfig& render) {
  reject_unknown_keys(doc, "render", {"resolution", "softness_sigma", "samples_per_curve"});
  read_field(doc, "resolution", "render", render.resolution);
  render.softness_sigma = 1.5 / std::max(render.resolution, 1);
  read_field(doc, "softness_sigma", "render", render.softness_sigma);
  read_field(doc, "samples_per_curve", "render", render.samples_per_curve);
}

void parse_overlay(const json& doc, OverlayConfig& overlay) {
  reject_unknown_keys(doc, "overlay", {"blur_sigma", "lambda_overlay", "epsilon"});
  read_field(doc, "blur_sigma", "overlay", overlay.blur_sigma);
  read_field(doc, "epsilon", "overlay", overlay.epsilon);
  if (const auto it = doc.find("lambda_overlay"); it != doc.end()) {
    if (it->is_number()) {
      overlay.lambda_overlay = {it->get<double>()};
    } else {
      read_field(doc, "lambda_overlay", "overlay", overlay.lambda_overlay);
    }
  }
}

void parse_optimize(const json& doc, OptimizeConfig& opt) {
  const std::string w = "optimize";
  reject_unknown_keys(doc, w,
                      {"iterations", "learning_rate", "width_learning_rate",
                       "opacity_learning_rate", "adam_beta1", "adam_beta2", "adam_eps", "seed",
                       "init_strategy", "init_radius", "init_offset", "guidance_scale",
                       "snapshot_every", "learn_width", "learn_opacity", "stroke_width",
                       "stroke_opacity"});
  read_field(doc, "iterations", w, opt.iterations);
  read_field(doc, "learning_rate", w, opt.learning_rate);
  read_field(doc, "width_learning_rate", w, opt.width_learning_rate);
  read_field(doc, "opacity_learning_rate", w, opt.opacity_learning_rate);
  read_field(doc, "adam_beta1", w, opt.adam.beta1);
  read_field(doc, "adam_beta2", w, opt.adam.beta2);
  read_field(doc, "adam_eps", w, opt.adam.eps);
  read_field(doc, "seed", w, opt.seed);
  if (doc.contains("init_strategy")) {
    std::string name;
    read_field(doc, "init_strategy", w, name);
    try {
      opt.init_strategy = parse_init_strategy(name);
    } catch (const ContractViolation& e) {
      throw ConfigError("optimize.init_strategy", e.what());
    }
  }
  read_field(doc, "init_radius", w, opt.init_radius);
  if (doc.contains("init_offset")) {
    opt.init_offset = read_point(doc["init_offset"], "optimize.init_offset");
  }
  read_field(doc, "guidance_scale", w, opt.guidance_scale);
  read_field(doc, "snapshot_every", w, opt.snapshot_every);
  read_field(doc, "learn_width", w, opt.learnable.width);
  read_field(doc, "learn_opacity", w, opt.learnable.opacity);
  read_field(doc, "stroke_width", w, opt.stroke_width);
  read_field(doc, "stroke_opacity", w, opt.stroke_opacity);
}

void parse_provider(const json& doc, ProviderConfig& provider) {
  std::string type;
  require_field(doc, "type", "provider", type);
  if (type == "local-target") {
    reject_unknown_keys(doc, "provider", {"type", "targets"});
    provider.kind = ProviderConfig::Kind::local_target;
    const json& targets = require_object(doc, "targets", "provider.targets");
    for (const auto& item : targets.items()) {
      const std::string where = "provider.targets." + item.key();
      if (!item.value().is_array() || item.value().empty()) {
        throw ConfigError(where, "must be a non-empty list of shapes");
      }
      auto& shapes = provider.targets[item.key()];
      for (std::size_t i = 0; i < item.value().size(); ++i) {
        shapes.push_back(parse_shape(item.value()[i], where + "[" + std::to_string(i) + "]"));
      }
    }
  } else if (type == "remote") {
    reject_unknown_keys(doc, "provider",
                        {"type", "endpoint", "max_attempts", "initial_backoff_ms", "timeout_s"});
    provider.kind = ProviderConfig::Kind::remote;
    require_field(doc, "endpoint", "provider", provider.endpoint);
    read_field(doc, "max_attempts", "provider", provider.max_attempts);
    read_field(doc, "initial_backoff_ms", "provider", provider.initial_backoff_ms);
    read_field(doc, "timeout_s", "provider", provider.timeout_s);
  } else {
    throw ConfigError("provider.type", "must be 'local-target' or 'remote'");
  }
}

}  // namespace

void validate_run_config(const RunConfig& cfg) {
  if (cfg.prompts.empty()) throw ConfigError("prompts", "must not be empty");
  if (cfg.num_strokes < 1) throw ConfigError("num_strokes", "must be >= 1");
  try {
    cfg.plan().validate(cfg.num_strokes);
  } catch (const ContractViolation& e) {
    const std::string msg = e.what();
    throw ConfigError(msg.rfind("prompts", 0) == 0 ? "prompts" : "boundaries", msg);
  }
  try {
    cfg.optimize.validate(cfg.boundaries.size());
  } catch (const ContractViolation& e) {
    const std::string msg = e.what();
    throw ConfigError(msg.substr(0, msg.find(' ')), msg);
  }
  if (cfg.preview_resolution < 8) throw ConfigError("preview_resolution", "must be >= 8");
  if (cfg.output_dir.empty()) throw ConfigError("output_dir", "must not be empty");

  const auto& provider = cfg.provider;
  if (provider.kind == ProviderConfig::Kind::local_target) {
    for (const auto& prompt : cfg.prompts) {
      if (!provider.targets.contains(prompt)) {
        throw ConfigError("provider.targets", "no target for prompt '" + prompt + "'");
      }
    }
  } else {
    if (provider.endpoint.empty()) throw ConfigError("provider.endpoint", "must not be empty");
    if (provider.max_attempts < 1) throw ConfigError("provider.max_attempts", "must be >= 1");
    if (provider.initial_backoff_ms < 0) {
      throw ConfigError("provider.initial_backoff_ms", "must be >= 0");
    }
    if (provider.timeout_s < 1) throw ConfigError("provider.timeout_s", "must be >= 1");
  }
}

RunConfig parse_run_config(const json& doc) {
  if (!doc.is_object()) throw ConfigError("(root)", "config must be a JSON object");
  reject_unknown_keys(doc, "",
                      {"prompts", "num_strokes", "boundaries", "optimize", "render", "overlay",
                       "provider", "output_dir", "preview_resolution"});
  RunConfig cfg;
  require_field(doc, "prompts", "", cfg.prompts);
  require_field(doc, "num_strokes", "", cfg.num_strokes);
  require_field(doc, "boundaries", "", cfg.boundaries);
  read_field(doc, "output_dir", "", cfg.output_dir);
  read_field(doc, "preview_resolution", "", cfg.preview_resolution);
  if (doc.contains("render")) parse_render(require_object(doc, "render", "render"), cfg.optimize.render);
  if (doc.contains("overlay")) {
    parse_overlay(require_object(doc, "overlay", "overlay"), cfg.optimize.overlay);
  }
  if (doc.contains("optimize")) {
    parse_optimize(require_object(doc, "optimize", "optimize"), cfg.optimize);
  }
  parse_provider(require_object(doc, "provider", "provider"), cfg.provider);
  validate_run_config(cfg);
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("(file)", "cannot open " + path.string());
  json doc = json::parse(in, nullptr, /*allow_exceptions=*/false);
  if (doc.is_discarded()) throw ConfigError("(file)", path.string() + " is not valid JSON");
  return parse_run_config(doc);
}

json to_json(const RunConfig& cfg) {
  const OptimizeConfig& opt = cfg.optimize;
  json lambda = opt.overlay.lambda_overlay.size() == 1 ? json(opt.overlay.lambda_overlay.front())
                                                       : json(opt.overlay.lambda_overlay);
  json provider;
  if (cfg.provider.kind == ProviderConfig::Kind::local_target) {
    json targets = json::object();
    for (const auto& [prompt, shapes] : cfg.provider.targets) {
      json list = json::array();
      for (const auto& s : shapes) list.push_back(shape_json(s));
      targets[prompt] = list;
    }
    provider = {{"type", "local-target"}, {"targets", targets}};
  } else {
    provider = {{"type", "remote"},
                {"endpoint", cfg.provider.endpoint},
                {"max_attempts", cfg.provider.max_attempts},
                {"initial_backoff_ms", cfg.provider.initial_backoff_ms},
                {"timeout_s", cfg.provider.timeout_s}};
  }
  return {
      {"prompts", cfg.prompts},
      {"num_strokes", cfg.num_strokes},
      {"boundaries", cfg.boundaries},
      {"output_dir", cfg.output_dir},
      {"preview_resolution", cfg.preview_resolution},
      {"render",
       {{"resolution", opt.render.resolution},
        {"softness_sigma", opt.render.softness_sigma},
        {"samples_per_curve", opt.render.samples_per_curve}}},
      {"overlay",
       {{"blur_sigma", opt.overlay.blur_sigma},
        {"lambda_overlay", lambda},
        {"epsilon", opt.overlay.epsilon}}},
      {"optimize",
       {{"iterations", opt.iterations},
        {"learning_rate", opt.learning_rate},
        {"width_learning_rate", opt.width_learning_rate},
        {"opacity_learning_rate", opt.opacity_learning_rate},
        {"adam_beta1", opt.adam.beta1},
        {"adam_beta2", opt.adam.beta2},
        {"adam_eps", opt.adam.eps},
        {"seed", opt.seed},
        {"init_strategy", to_string(opt.init_strategy)},
        {"init_radius", opt.init_radius},
        {"init_offset", point_json(opt.init_offset)},
        {"guidance_scale", opt.guidance_scale},
        {"snapshot_every", opt.snapshot_every},
        {"learn_width", opt.learnable.width},
        {"learn_opacity", opt.learnable.opacity},
        {"stroke_width", opt.stroke_width},
        {"stroke_opacity", opt.stroke_opacity}}},
      {"provider", provider},
  };
}

InkImage<double> rasterize_target(const std::vector<TargetShape>& shapes, int resolution,
                                  const std::filesystem::path& base_dir) {
  InkImage<double> mask = InkImage<double>::Zero(resolution, resolution);
  for (const auto& shape : shapes) {
    if (shape.kind == TargetShape::Kind::png) {
      std::filesystem::path path(shape.path);
      if (path.is_relative() && !base_dir.empty()) path = base_dir / path;
      const auto ink = read_ink_png(path);
      if (ink.rows() != resolution || ink.cols() != resolution) {
        throw ConfigError("provider.targets", path.string() + " does not match render resolution");
      }
      mask = mask.cwiseMax(ink);
      continue;
    }
    for (int r = 0; r < resolution; ++r) {
      for (int c = 0; c < resolution; ++c) {
        const Point2<double> x((c + 0.5) / resolution, (r + 0.5) / resolution);
        bool inside = false;
        if (shape.kind == TargetShape::Kind::disk) {
          inside = (x - shape.center).norm() <= shape.radius;
        } else {
          const auto& v = shape.vertices;
          auto edge = [](const Point2<double>& a, const Point2<double>& b, const Point2<double>& p) {
            return (b.x() - a.x()) * (p.y() - a.y()) - (b.y() - a.y()) * (p.x() - a.x());
          };
          const double e0 = edge(v[0], v[1], x);
          const double e1 = edge(v[1], v[2], x);
          const double e2 = edge(v[2], v[0], x);
          inside = (e0 >= 0 && e1 >= 0 && e2 >= 0) || (e0 <= 0 && e1 <= 0 && e2 <= 0);
        }
        if (inside) mask(r, c) = 1.0;
      }
    }
  }
  return mask;
}

Endpoint make_endpoint(const ProviderConfig& provider) {
  Endpoint endpoint;
  endpoint.url = resolve_endpoint_url(provider.endpoint);
  endpoint.timeout = std::chrono::seconds(provider.timeout_s);
  endpoint.retry.max_attempts = provider.max_attempts;
  endpoint.retry.initial_backoff = std::chrono::milliseconds(provider.initial_backoff_ms);
  return endpoint;
}

ProviderMap make_providers(const RunConfig& cfg, const std::filesystem::path& base_dir) {
  ProviderMap providers;
  if (cfg.provider.kind == ProviderConfig::Kind::remote) {
    auto remote = std::make_shared<RemoteGuidanceProvider>(make_endpoint(cfg.provider));
    for (const auto& prompt : cfg.prompts) providers[prompt] = remote;
    return providers;
  }
  for (const auto& prompt : cfg.prompts) {
    providers[prompt] = std::make_shared<TargetMatchProvider>(rasterize_target(
        cfg.provider.targets.at(prompt), cfg.optimize.render.resolution, base_dir));
  }
  return providers;
}

}  // namespace strokeshift
