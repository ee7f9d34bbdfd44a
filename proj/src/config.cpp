#include "gflow/config.hpp"

#include "gflow/util.hpp"

#include <cctype>
#include <cmath>
#include <filesystem>
#include <set>

namespace gflow {

namespace {

[[noreturn]] void fail(int line, const std::string& msg) {
  throw ConfigError("line " + std::to_string(line) + ": " + msg);
}

class Parser {
 public:
  explicit Parser(const std::string& text) : s_(text) {}

  ConfigValue parse() {
    ConfigValue root;
    root.type = ConfigValue::Type::table;
    root.line = 1;
    ConfigValue* current = &root;
    while (true) {
      skip_blank_lines();
      if (eof()) break;
      if (peek() == '[') {
        ++pos_;
        skip_spaces();
        const int line = line_;
        const std::string name = parse_key();
        skip_spaces();
        expect(']');
        end_of_line();
        if (root.fields.count(name)) fail(line, "duplicate table [" + name + "]");
        ConfigValue table;
        table.type = ConfigValue::Type::table;
        table.line = line;
        current = &root.fields.emplace(name, std::move(table)).first->second;
        continue;
      }
      const int line = line_;
      const std::string key = parse_key();
      skip_spaces();
      expect('=');
      skip_spaces();
      ConfigValue v = parse_value();
      v.line = line;
      if (current->fields.count(key)) fail(line, "duplicate key '" + key + "'");
      current->fields.emplace(key, std::move(v));
      end_of_line();
    }
    return root;
  }

 private:
  bool eof() const { return pos_ >= s_.size(); }
  char peek() const { return eof() ? '\0' : s_[pos_]; }

  void advance() {
    if (s_[pos_] == '\n') ++line_;
    ++pos_;
  }

  void skip_spaces() {
    while (!eof() && (peek() == ' ' || peek() == '\t' || peek() == '\r')) ++pos_;
  }

  void skip_comment() {
    if (peek() == '#')
      while (!eof() && peek() != '\n') ++pos_;
  }

  // Whitespace, comments and newlines, as allowed inside arrays.
  void skip_all() {
    while (!eof()) {
      skip_spaces();
      skip_comment();
      if (peek() == '\n')
        advance();
      else
        break;
    }
  }

  void skip_blank_lines() { skip_all(); }

  void end_of_line() {
    skip_spaces();
    skip_comment();
    if (eof()) return;
    if (peek() != '\n') fail(line_, std::string("unexpected '") + peek() + "' after value");
    advance();
  }

  void expect(char c) {
    if (peek() != c) fail(line_, std::string("expected '") + c + "'" + (eof() ? " before end of file" : ""));
    ++pos_;
  }

  std::string parse_key() {
    std::string key;
    while (!eof() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_' || peek() == '-' || peek() == '.'))
      key += s_[pos_++];
    if (key.empty()) fail(line_, eof() ? "unexpected end of file" : std::string("expected a key, found '") + peek() + "'");
    return key;
  }

  ConfigValue parse_value() {
    ConfigValue v;
    v.line = line_;
    const char c = peek();
    if (c == '"') {
      v.type = ConfigValue::Type::string;
      ++pos_;
      while (true) {
        if (eof() || peek() == '\n') fail(v.line, "unterminated string");
        char ch = s_[pos_++];
        if (ch == '"') break;
        if (ch == '\\') {
          if (eof()) fail(v.line, "unterminated string");
          const char esc = s_[pos_++];
          switch (esc) {
            case 'n': ch = '\n'; break;
            case 't': ch = '\t'; break;
            case '"': ch = '"'; break;
            case '\\': ch = '\\'; break;
            default: fail(v.line, std::string("unknown escape \\") + esc);
          }
        }
        v.text += ch;
      }
      return v;
    }
    if (c == '[') {
      v.type = ConfigValue::Type::array;
      ++pos_;
      skip_all();
      while (peek() != ']') {
        if (eof()) fail(v.line, "unterminated array");
        v.items.push_back(parse_value());
        skip_all();
        if (peek() == ',') {
          ++pos_;
          skip_all();
        } else if (peek() != ']') {
          fail(line_, "expected ',' or ']' in array");
        }
      }
      ++pos_;
      return v;
    }
    if (c == '{') {
      v.type = ConfigValue::Type::table;
      ++pos_;
      skip_spaces();
      while (peek() != '}') {
        if (eof() || peek() == '\n') fail(v.line, "unterminated inline table");
        const std::string key = parse_key();
        skip_spaces();
        expect('=');
        skip_spaces();
        ConfigValue item = parse_value();
        if (v.fields.count(key)) fail(v.line, "duplicate key '" + key + "' in inline table");
        v.fields.emplace(key, std::move(item));
        skip_spaces();
        if (peek() == ',') {
          ++pos_;
          skip_spaces();
        } else if (peek() != '}') {
          fail(line_, "expected ',' or '}' in inline table");
        }
      }
      ++pos_;
      return v;
    }
    std::string word;
    while (!eof() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '.' || peek() == '-' ||
                      peek() == '+' || peek() == '_'))
      word += s_[pos_++];
    if (word == "true" || word == "false") {
      v.type = ConfigValue::Type::boolean;
      v.boolean = word == "true";
      return v;
    }
    if (word.empty()) fail(v.line, eof() ? "missing value" : std::string("unexpected '") + c + "'");
    std::string digits;
    for (char ch : word)
      if (ch != '_') digits += ch;
    try {
      v.number = parse_double(digits);
    } catch (const std::invalid_argument&) {
      fail(v.line, "invalid value '" + word + "'");
    }
    v.type = ConfigValue::Type::number;
    return v;
  }

  const std::string& s_;
  std::size_t pos_ = 0;
  int line_ = 1;
};

std::string where(const ConfigValue& v, const std::string& what) {
  return "line " + std::to_string(v.line) + ": " + what;
}

void check_keys(const ConfigValue& table, const std::set<std::string>& allowed, const std::string& context) {
  for (const auto& [k, v] : table.fields)
    if (!allowed.count(k)) throw ConfigError(where(v, "unknown key '" + k + "' in " + context));
}

LayerEntry parse_layer(const ConfigValue& v) {
  if (v.type != ConfigValue::Type::table) throw ConfigError(where(v, "layer entries must be inline tables"));
  check_keys(v, {"kind", "width", "bias"}, "layer");
  LayerEntry e;
  if (const auto* k = v.find("kind")) {
    try {
      e.kind = layer_kind_from_string(k->as_string("layer kind"));
    } catch (const std::invalid_argument& ex) {
      throw ConfigError(where(v, ex.what()));
    }
  }
  if (const auto* w = v.find("width")) e.width = w->as_count("layer width");
  if (const auto* b = v.find("bias")) e.bias = b->as_bool("layer bias");
  if (e.width == 0 && e.kind != LayerKind::residual) throw ConfigError(where(v, "layer needs a positive width"));
  return e;
}

}  // namespace

const ConfigValue* ConfigValue::find(const std::string& key) const {
  auto it = fields.find(key);
  return it == fields.end() ? nullptr : &it->second;
}

std::string ConfigValue::type_name() const {
  switch (type) {
    case Type::string: return "string";
    case Type::number: return "number";
    case Type::boolean: return "boolean";
    case Type::array: return "array";
    case Type::table: return "table";
  }
  return "?";
}

double ConfigValue::as_number(const std::string& what) const {
  if (type != Type::number) throw ConfigError(where(*this, what + " must be a number, got " + type_name()));
  return number;
}

std::size_t ConfigValue::as_count(const std::string& what) const {
  const double x = as_number(what);
  if (!(x >= 1) || x != std::floor(x) || x > 1e15)
    throw ConfigError(where(*this, what + " must be a positive integer"));
  return static_cast<std::size_t>(x);
}

std::uint64_t ConfigValue::as_seed(const std::string& what) const {
  const double x = as_number(what);
  if (!(x >= 0) || x != std::floor(x) || x > 9007199254740992.0)
    throw ConfigError(where(*this, what + " must be a non-negative integer"));
  return static_cast<std::uint64_t>(x);
}

const std::string& ConfigValue::as_string(const std::string& what) const {
  if (type != Type::string) throw ConfigError(where(*this, what + " must be a string, got " + type_name()));
  return text;
}

bool ConfigValue::as_bool(const std::string& what) const {
  if (type != Type::boolean) throw ConfigError(where(*this, what + " must be true or false"));
  return boolean;
}

const std::vector<ConfigValue>& ConfigValue::as_array(const std::string& what) const {
  if (type != Type::array) throw ConfigError(where(*this, what + " must be an array, got " + type_name()));
  return items;
}

ConfigValue parse_config_text(const std::string& text) { return Parser(text).parse(); }

ExperimentConfig parse_experiment_config(const std::string& text, const std::string& base_dir) {
  const ConfigValue root = parse_config_text(text);
  ExperimentConfig cfg;
  cfg.source_text = text;
  cfg.base_dir = base_dir;
  check_keys(root,
             {"name", "activation", "activation_params", "layers", "seeds", "output_dir", "save_thetas", "graph",
              "data", "flow", "certify", "sweep", "plot"},
             "top level");

  if (const auto* v = root.find("name")) cfg.name = v->as_string("name");
  if (const auto* v = root.find("activation")) cfg.activation = v->as_string("activation");
  if (const auto* v = root.find("activation_params"))
    for (const auto& p : v->as_array("activation_params")) cfg.activation_params.push_back(p.as_number("activation parameter"));
  try {
    (void)builtin(cfg.activation, cfg.activation_params);
  } catch (const std::invalid_argument& e) {
    const auto* v = root.find("activation");
    throw ConfigError("line " + std::to_string(v ? v->line : 1) + ": " + e.what());
  }

  const auto* layers = root.find("layers");
  if (!layers) throw ConfigError("line 1: missing 'layers'");
  for (const auto& l : layers->as_array("layers")) cfg.layers.push_back(parse_layer(l));
  if (cfg.layers.empty()) throw ConfigError(where(*layers, "'layers' must not be empty"));

  const auto* seeds = root.find("seeds");
  if (!seeds) throw ConfigError("line 1: missing 'seeds'");
  for (const auto& s : seeds->as_array("seeds")) cfg.seeds.push_back(s.as_seed("seed"));
  if (cfg.seeds.empty()) throw ConfigError(where(*seeds, "'seeds' must list at least one seed"));

  if (const auto* v = root.find("output_dir")) cfg.output_dir = v->as_string("output_dir");
  else cfg.output_dir = "runs/" + cfg.name;
  if (const auto* v = root.find("save_thetas")) cfg.save_thetas = v->as_bool("save_thetas");

  if (const auto* g = root.find("graph")) {
    if (g->type != ConfigValue::Type::table) throw ConfigError(where(*g, "graph must be a table"));
    check_keys(*g, {"knn_k"}, "graph");
    const auto* k = g->find("knn_k");
    if (!k) throw ConfigError(where(*g, "graph needs knn_k"));
    cfg.knn_k = k->as_count("knn_k");
  }

  if (const auto* d = root.find("data")) {
    check_keys(*d, {"n", "N", "M", "radius", "label_std", "seed", "path"}, "[data]");
    if (const auto* v = d->find("n")) cfg.data.n = v->as_count("n");
    if (const auto* v = d->find("N")) cfg.data.N = v->as_count("N");
    if (const auto* v = d->find("M")) cfg.data.M = v->as_count("M");
    if (const auto* v = d->find("radius")) cfg.data.radius = v->as_number("radius");
    if (const auto* v = d->find("label_std")) cfg.data.label_std = v->as_number("label_std");
    if (const auto* v = d->find("seed")) cfg.data.seed = v->as_seed("data seed");
    if (const auto* v = d->find("path")) cfg.data.path = v->as_string("data path");
    if (!(cfg.data.radius > 0.0)) throw ConfigError(where(*d, "radius must be positive"));
    if (!(cfg.data.label_std > 0.0)) throw ConfigError(where(*d, "label_std must be positive"));
  }

  if (const auto* f = root.find("flow")) {
    check_keys(*f, {"scheme", "step", "T", "log_stride", "abs_tol", "rel_tol", "kink_refine", "track_events"}, "[flow]");
    if (const auto* v = f->find("scheme")) {
      try {
        cfg.flow.scheme = scheme_from_string(v->as_string("scheme"));
      } catch (const std::invalid_argument& e) {
        throw ConfigError(where(*v, e.what()));
      }
    }
    if (const auto* v = f->find("step")) cfg.flow.step = v->as_number("step");
    if (const auto* v = f->find("T")) cfg.flow.horizon = v->as_number("T");
    if (const auto* v = f->find("log_stride")) cfg.flow.log_stride = v->as_number("log_stride");
    if (const auto* v = f->find("abs_tol")) cfg.flow.abs_tol = v->as_number("abs_tol");
    if (const auto* v = f->find("rel_tol")) cfg.flow.rel_tol = v->as_number("rel_tol");
    if (const auto* v = f->find("kink_refine")) cfg.flow.kink_refine = v->as_bool("kink_refine");
    if (const auto* v = f->find("track_events")) cfg.flow.track_events = v->as_bool("track_events");
    try {
      cfg.flow.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(where(*f, e.what()));
    }
  }

  if (const auto* c = root.find("certify")) {
    check_keys(*c, {"tol_rel"}, "[certify]");
    if (const auto* v = c->find("tol_rel")) cfg.tol_rel = v->as_number("tol_rel");
    if (!(cfg.tol_rel >= 0.0)) throw ConfigError(where(*c, "tol_rel must be non-negative"));
  }

  if (const auto* p = root.find("plot")) {
    check_keys(*p, {"drop_initial_percent"}, "[plot]");
    if (const auto* v = p->find("drop_initial_percent")) cfg.drop_initial_percent_in_plots = v->as_bool("drop_initial_percent");
  }
  bool residual_net = false;
  for (const auto& l : cfg.layers) residual_net = residual_net || l.kind == LayerKind::residual;
  if (residual_net && !root.find("plot")) cfg.drop_initial_percent_in_plots = true;

  if (const auto* s = root.find("sweep")) {
    check_keys(*s, {"hidden", "depth"}, "[sweep]");
    if (const auto* h = s->find("hidden")) {
      for (const auto& point : h->as_array("sweep.hidden")) {
        std::vector<std::size_t> widths;
        for (const auto& w : point.as_array("sweep.hidden entry")) widths.push_back(w.as_count("hidden width"));
        if (widths.empty()) throw ConfigError(where(point, "empty hidden-width entry"));
        cfg.sweep_hidden.push_back(std::move(widths));
      }
    }
    if (const auto* d = s->find("depth"))
      for (const auto& v : d->as_array("sweep.depth")) cfg.sweep_depth.push_back(v.as_count("depth"));
    if (!cfg.sweep_hidden.empty() && !cfg.sweep_depth.empty())
      throw ConfigError(where(*s, "sweep over either hidden or depth, not both"));
  }

  // Width sanity against the data dimensions.
  const bool gcn = cfg.layers.front().kind == LayerKind::gcn;
  if (gcn && !cfg.knn_k) throw ConfigError(where(*layers, "gcn layers need graph = {knn_k = ...}"));
  for (const auto& l : cfg.layers)
    if ((l.kind == LayerKind::gcn) != gcn) throw ConfigError(where(*layers, "gcn layers cannot be mixed with other kinds"));
  if (cfg.data.path.empty()) {
    const auto& last = cfg.layers.back();
    const std::size_t out = last.width == 0 ? cfg.data.N : last.width;
    if (out != cfg.data.M)
      throw ConfigError(where(*layers, "last layer width " + std::to_string(out) + " must equal M = " + std::to_string(cfg.data.M)));
  }
  return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const std::runtime_error& e) {
    throw ConfigError(e.what());
  }
  const auto dir = std::filesystem::path(path).parent_path();
  return parse_experiment_config(text, dir.empty() ? "." : dir.string());
}

std::vector<SweepPoint> sweep_points(const ExperimentConfig& cfg) {
  std::vector<SweepPoint> out;
  auto join = [](const std::vector<std::size_t>& w) {
    std::string s;
    for (std::size_t i = 0; i < w.size(); ++i) s += (i ? "x" : "") + std::to_string(w[i]);
    return s;
  };
  if (!cfg.sweep_hidden.empty()) {
    const LayerEntry hidden_proto = cfg.layers.front();
    for (const auto& widths : cfg.sweep_hidden) {
      SweepPoint p;
      p.label = "h" + join(widths);
      for (std::size_t w : widths) p.layers.push_back({hidden_proto.kind, w, hidden_proto.bias});
      p.layers.push_back(cfg.layers.back());
      out.push_back(std::move(p));
    }
  } else if (!cfg.sweep_depth.empty()) {
    for (std::size_t d : cfg.sweep_depth) {
      SweepPoint p;
      p.label = "d" + std::to_string(d);
      p.layers.assign(d, cfg.layers.front());
      out.push_back(std::move(p));
    }
  } else {
    SweepPoint p;
    p.label = "base";
    p.layers = cfg.layers;
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace gflow
