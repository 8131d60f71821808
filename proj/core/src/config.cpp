#include "icoseg/config.hpp"

#include <fstream>
#include <map>
#include <sstream>

#include "icoseg/icosphere.hpp"

namespace icoseg {

void ModelConfig::validate() const {
  if (output_rank < 2 || output_rank > kMaxMeshRank)
    throw ConfigError("output_rank must be in [2, " +
                      std::to_string(kMaxMeshRank) + "]");
  if (num_stages < 1) throw ConfigError("num_stages must be >= 1");
  if (dim < 1 || heads < 1 || dim % heads != 0)
    throw ConfigError("dim must be a positive multiple of heads");
  if (blocks_per_stage < 1) throw ConfigError("blocks_per_stage must be >= 1");
  if (num_classes < 2) throw ConfigError("num_classes must be >= 2");
  if (anchors < 1) throw ConfigError("anchors must be >= 1");
  if (bins < 2) throw ConfigError("bins must be >= 2");
  if (fourier_order < 0) throw ConfigError("fourier_order must be >= 0");
  if (!(lambda_eq >= 0.0)) throw ConfigError("lambda_eq must be >= 0");
}

void TrainConfig::validate() const {
  if (!(lr >= 0.0)) throw ConfigError("lr must be >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
    throw ConfigError("adam betas must lie in [0, 1)");
  if (!(adam_eps > 0.0)) throw ConfigError("adam_eps must be > 0");
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
  if (!(val_fraction >= 0.0 && val_fraction < 1.0))
    throw ConfigError("val_fraction must lie in [0, 1)");
  if (yaw_aug != "symmetry" && yaw_aug != "continuous" && yaw_aug != "off")
    throw ConfigError("yaw_aug must be symmetry, continuous, or off");
  if (init != "glorot" && init != "zeros")
    throw ConfigError("init must be glorot or zeros");
}

namespace {

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "on") return true;
  if (v == "false" || v == "0" || v == "off") return false;
  throw ConfigError("config key '" + key + "': expected boolean, got '" + v + "'");
}

int parse_int(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const int out = std::stoi(v, &used);
    if (used != v.size()) throw std::invalid_argument("");
    return out;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': expected integer, got '" + v + "'");
  }
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double out = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument("");
    return out;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': expected number, got '" + v + "'");
  }
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const std::uint64_t out = std::stoull(v, &used);
    if (used != v.size()) throw std::invalid_argument("");
    return out;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': expected unsigned integer, got '" + v + "'");
  }
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

Config parse_config_text(const std::string& text) {
  Config c;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) +
                        ": expected key=value");
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    if (key.empty() || val.empty())
      throw ConfigError("config line " + std::to_string(lineno) +
                        ": empty key or value");

    ModelConfig& m = c.model;
    TrainConfig& t = c.train;
    if (key == "output_rank") m.output_rank = parse_int(key, val);
    else if (key == "num_stages") m.num_stages = parse_int(key, val);
    else if (key == "dim") m.dim = parse_int(key, val);
    else if (key == "heads") m.heads = parse_int(key, val);
    else if (key == "blocks_per_stage") m.blocks_per_stage = parse_int(key, val);
    else if (key == "num_classes") m.num_classes = parse_int(key, val);
    else if (key == "anchors") m.anchors = parse_int(key, val);
    else if (key == "bins") m.bins = parse_int(key, val);
    else if (key == "fourier_order") m.fourier_order = parse_int(key, val);
    else if (key == "abs_lat_pe") m.abs_lat_pe = parse_bool(key, val);
    else if (key == "quadrature_attn") m.quadrature_attn = parse_bool(key, val);
    else if (key == "gauge_bias") m.gauge_bias = parse_bool(key, val);
    else if (key == "geo_sampling") m.geo_sampling = parse_bool(key, val);
    else if (key == "l_eq") m.l_eq = parse_bool(key, val);
    else if (key == "lambda_eq") m.lambda_eq = parse_double(key, val);
    else if (key == "scale_init") m.scale_init = parse_double(key, val);
    else if (key == "lr") t.lr = parse_double(key, val);
    else if (key == "beta1") t.beta1 = parse_double(key, val);
    else if (key == "beta2") t.beta2 = parse_double(key, val);
    else if (key == "adam_eps") t.adam_eps = parse_double(key, val);
    else if (key == "epochs") t.epochs = parse_int(key, val);
    else if (key == "seed") t.seed = parse_u64(key, val);
    else if (key == "val_fraction") t.val_fraction = parse_double(key, val);
    else if (key == "yaw_aug") t.yaw_aug = val;
    else if (key == "flip_aug") t.flip_aug = parse_bool(key, val);
    else if (key == "init") t.init = val;
    else
      throw ConfigError("config line " + std::to_string(lineno) +
                        ": unknown key '" + key + "'");
  }
  c.model.validate();
  c.train.validate();
  return c;
}

Config load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config_text(ss.str());
}

std::string config_to_text(const Config& c) {
  std::ostringstream os;
  os.precision(17);
  const ModelConfig& m = c.model;
  const TrainConfig& t = c.train;
  os << "# model\n";
  os << "output_rank = " << m.output_rank << "\n";
  os << "num_stages = " << m.num_stages << "\n";
  os << "dim = " << m.dim << "\n";
  os << "heads = " << m.heads << "\n";
  os << "blocks_per_stage = " << m.blocks_per_stage << "\n";
  os << "num_classes = " << m.num_classes << "\n";
  os << "anchors = " << m.anchors << "\n";
  os << "bins = " << m.bins << "\n";
  os << "fourier_order = " << m.fourier_order << "\n";
  os << "abs_lat_pe = " << (m.abs_lat_pe ? "true" : "false") << "\n";
  os << "quadrature_attn = " << (m.quadrature_attn ? "true" : "false") << "\n";
  os << "gauge_bias = " << (m.gauge_bias ? "true" : "false") << "\n";
  os << "geo_sampling = " << (m.geo_sampling ? "true" : "false") << "\n";
  os << "l_eq = " << (m.l_eq ? "true" : "false") << "\n";
  os << "lambda_eq = " << m.lambda_eq << "\n";
  os << "scale_init = " << m.scale_init << "\n";
  os << "# training\n";
  os << "lr = " << t.lr << "\n";
  os << "beta1 = " << t.beta1 << "\n";
  os << "beta2 = " << t.beta2 << "\n";
  os << "adam_eps = " << t.adam_eps << "\n";
  os << "epochs = " << t.epochs << "\n";
  os << "seed = " << t.seed << "\n";
  os << "val_fraction = " << t.val_fraction << "\n";
  os << "yaw_aug = " << t.yaw_aug << "\n";
  os << "flip_aug = " << (t.flip_aug ? "true" : "false") << "\n";
  os << "init = " << t.init << "\n";
  return os.str();
}

std::string default_config_text() {
  return
      "# Spherical segmentation configuration. '#' starts a comment.\n"
      "\n"
      "# --- model geometry ---\n"
      "output_rank = 5       # icosphere rank of inputs/labels (2..7)\n"
      "num_stages = 3        # encoder stages; clamped to the token rank\n"
      "dim = 32              # token channel width\n"
      "heads = 4             # attention heads (must divide dim)\n"
      "blocks_per_stage = 2  # transformer blocks per stage\n"
      "num_classes = 14      # class 0 is ignore\n"
      "anchors = 3           # tangent anchors per node\n"
      "bins = 16             # radial distance bins\n"
      "fourier_order = 6     # angular modes in the attention bias\n"
      "\n"
      "# --- ablation switches ---\n"
      "abs_lat_pe = false      # absolute latitude positional encoding\n"
      "quadrature_attn = true  # area-weighted attention logits\n"
      "gauge_bias = true       # learned geometric attention bias\n"
      "geo_sampling = true     # geodesic pooling and upsampling\n"
      "l_eq = true             # rotation-consistency loss term\n"
      "lambda_eq = 0.05        # weight of the consistency term\n"
      "scale_init = 2.302585092994046  # log(10) temperature init\n"
      "\n"
      "# --- training ---\n"
      "lr = 0.0001\n"
      "beta1 = 0.9\n"
      "beta2 = 0.999\n"
      "adam_eps = 1e-8\n"
      "epochs = 100\n"
      "seed = 1234\n"
      "val_fraction = 0.2    # tail fraction of the dataset held out\n"
      "yaw_aug = symmetry    # symmetry | continuous | off\n"
      "flip_aug = true       # random mirror augmentation\n"
      "init = glorot         # glorot | zeros\n";
}

}  // namespace icoseg
