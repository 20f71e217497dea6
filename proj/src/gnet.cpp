#include "spheremap/gnet.hpp"

#include <cmath>
#include <fstream>

#include "json.hpp"
#include "spheremap/errors.hpp"

namespace spheremap {

const char* to_string(UpsampleMode m) {
  switch (m) {
    case UpsampleMode::nearest_upsample: return "nearest_upsample";
    case UpsampleMode::transpose: return "transpose";
    case UpsampleMode::transpose_dilated: return "transpose_dilated";
  }
  return "?";
}

UpsampleMode upsample_mode_from_string(const std::string& s) {
  if (s == "nearest_upsample") return UpsampleMode::nearest_upsample;
  if (s == "transpose") return UpsampleMode::transpose;
  if (s == "transpose_dilated") return UpsampleMode::transpose_dilated;
  throw ConfigError("unknown upsample mode '" + s + "'");
}

void GNetConfig::validate() const {
  if (in_channels < 1 || out_channels < 1) throw ConfigError("channel counts must be positive");
  if (base_width < 4) throw ConfigError("base_width must be at least 4");
  if (depth < 2 || depth > 8) throw ConfigError("depth must lie in [2, 8]");
  const int d = divisor();
  if ((input_height && input_height % d) || (input_width && input_width % d)) {
    throw ShapeError("input " + std::to_string(input_height) + "x" + std::to_string(input_width) +
                     " is not divisible by " + std::to_string(d));
  }
}

void write_gnet_config(const std::filesystem::path& path, const GNetConfig& cfg) {
  nlohmann::json j{{"in_channels", cfg.in_channels},     {"base_width", cfg.base_width},
                   {"depth", cfg.depth},                 {"upsample", to_string(cfg.upsample)},
                   {"out_channels", cfg.out_channels},   {"batchnorm", cfg.batchnorm},
                   {"circular_width", cfg.circular_width},
                   {"head", cfg.head == OutputHead::sigmoid ? "sigmoid" : "linear"},
                   {"input_height", cfg.input_height},   {"input_width", cfg.input_width}};
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(1) << "\n";
}

GNetConfig read_gnet_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    nlohmann::json j;
    in >> j;
    GNetConfig c;
    c.in_channels = j.at("in_channels").get<int>();
    c.base_width = j.at("base_width").get<int>();
    c.depth = j.at("depth").get<int>();
    c.upsample = upsample_mode_from_string(j.at("upsample").get<std::string>());
    c.out_channels = j.at("out_channels").get<int>();
    c.batchnorm = j.at("batchnorm").get<bool>();
    c.circular_width = j.value("circular_width", false);
    c.head = j.value("head", std::string("sigmoid")) == "linear" ? OutputHead::linear : OutputHead::sigmoid;
    c.input_height = j.value("input_height", 0);
    c.input_width = j.value("input_width", 0);
    c.validate();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

std::size_t gnet_parameter_count(const GNetConfig& cfg) {
  cfg.validate();
  const std::size_t bn = cfg.batchnorm ? 1 : 0;
  auto conv3 = [&](std::size_t ci, std::size_t co) { return ci * co * 9 + (bn ? 2 * co : co); };
  auto dconv = [&](std::size_t ci, std::size_t co) { return conv3(ci, co) + conv3(co, co); };
  std::size_t c = cfg.base_width;
  std::size_t total = dconv(cfg.in_channels, c);
  for (int i = 1; i < cfg.depth; ++i, c *= 2) total += dconv(c, 2 * c);
  for (int i = 1; i < cfg.depth; ++i, c /= 2) {
    const std::size_t k = cfg.upsample == UpsampleMode::transpose ? 4 : 9;
    total += c * (c / 2) * k + c / 2;
    total += dconv(c, c / 2);
  }
  total += c * cfg.out_channels + cfg.out_channels;
  return total;
}

template <typename T>
Tensor<T> GNetModel<T>::init_uniform(const Shape& shape, double bound, Rng& rng) {
  std::vector<T> v(numel(shape));
  for (auto& x : v) x = static_cast<T>(rng.uniform(-bound, bound));
  return Tensor<T>(shape, std::move(v), true);
}

template <typename T>
typename GNetModel<T>::Conv GNetModel<T>::make_conv(const std::string& name, int cin, int cout, int k,
                                                    bool bias, Rng& rng) {
  Conv c;
  c.weight = init_uniform({cout, cin, k, k}, std::sqrt(6.0 / (cin * k * k)), rng);
  params_.push_back({name + ".weight", c.weight});
  if (bias) {
    c.bias = Tensor<T>::zeros({cout}, true);
    params_.push_back({name + ".bias", c.bias});
  }
  return c;
}

template <typename T>
typename GNetModel<T>::Conv GNetModel<T>::make_conv_transpose(const std::string& name, int cin, int cout,
                                                              int k, Rng& rng) {
  Conv c;
  c.weight = init_uniform({cin, cout, k, k}, std::sqrt(6.0 / (cin * k * k)), rng);
  c.bias = Tensor<T>::zeros({cout}, true);
  params_.push_back({name + ".weight", c.weight});
  params_.push_back({name + ".bias", c.bias});
  return c;
}

template <typename T>
typename GNetModel<T>::Norm GNetModel<T>::make_norm(const std::string& name, int c) {
  Norm n{Tensor<T>::full({c}, T(1), true), Tensor<T>::zeros({c}, true), BatchNormStats<T>::make(c), name};
  params_.push_back({name + ".gamma", n.gamma});
  params_.push_back({name + ".beta", n.beta});
  return n;
}

template <typename T>
typename GNetModel<T>::DoubleConv GNetModel<T>::make_double_conv(const std::string& name, int cin, int cout,
                                                                 Rng& rng) {
  DoubleConv b;
  const bool bias = !cfg_.batchnorm;
  b.conv1 = make_conv(name + ".conv1", cin, cout, 3, bias, rng);
  if (cfg_.batchnorm) b.bn1 = make_norm(name + ".bn1", cout);
  b.conv2 = make_conv(name + ".conv2", cout, cout, 3, bias, rng);
  if (cfg_.batchnorm) b.bn2 = make_norm(name + ".bn2", cout);
  return b;
}

template <typename T>
GNetModel<T> GNetModel<T>::build(const GNetConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  GNetModel m;
  m.cfg_ = cfg;
  Rng rng(seed);
  int c = cfg.base_width;
  m.inc_ = m.make_double_conv("inc", cfg.in_channels, c, rng);
  for (int i = 1; i < cfg.depth; ++i, c *= 2) {
    m.downs_.push_back(m.make_double_conv("down" + std::to_string(i), c, 2 * c, rng));
  }
  m.encoder_param_count_ = m.params_.size();
  for (int i = 1; i < cfg.depth; ++i, c /= 2) {
    const std::string name = "up" + std::to_string(i);
    UpStage s;
    switch (cfg.upsample) {
      case UpsampleMode::transpose_dilated: s.up = m.make_conv_transpose(name + ".up", c, c / 2, 3, rng); break;
      case UpsampleMode::transpose: s.up = m.make_conv_transpose(name + ".up", c, c / 2, 2, rng); break;
      case UpsampleMode::nearest_upsample: s.up = m.make_conv(name + ".up", c, c / 2, 3, true, rng); break;
    }
    s.block = m.make_double_conv(name, c, c / 2, rng);
    m.ups_.push_back(std::move(s));
  }
  m.head_ = m.make_conv("head", c, cfg.out_channels, 1, true, rng);
  return m;
}

template <typename T>
template <typename Fn>
void GNetModel<T>::for_each_norm(Fn&& fn) {
  if (!cfg_.batchnorm) return;
  auto visit = [&](DoubleConv& b) {
    fn(b.bn1);
    fn(b.bn2);
  };
  visit(inc_);
  for (auto& d : downs_) visit(d);
  for (auto& u : ups_) visit(u.block);
}

template <typename T>
Tensor<T> GNetModel<T>::run_double_conv(DoubleConv& b, const Tensor<T>& x, bool training) {
  Conv2dOptions o;
  o.padding = 1;
  o.circular_width = cfg_.circular_width;
  Tensor<T> h = conv2d(x, b.conv1.weight, b.conv1.bias, o);
  if (cfg_.batchnorm) h = batchnorm2d(h, b.bn1.gamma, b.bn1.beta, b.bn1.stats, training);
  h = relu(h);
  h = conv2d(h, b.conv2.weight, b.conv2.bias, o);
  if (cfg_.batchnorm) h = batchnorm2d(h, b.bn2.gamma, b.bn2.beta, b.bn2.stats, training);
  return relu(h);
}

template <typename T>
Tensor<T> GNetModel<T>::forward(const Tensor<T>& input, bool training) {
  if (input.rank() != 4 || input.dim(1) != cfg_.in_channels) {
    throw ShapeError("gnet forward expects [N," + std::to_string(cfg_.in_channels) + ",H,W], got " +
                     shape_str(input.shape()));
  }
  const int d = cfg_.divisor();
  if (input.dim(2) % d || input.dim(3) % d) {
    throw ShapeError("gnet input " + shape_str(input.shape()) + " has spatial dims not divisible by " +
                     std::to_string(d));
  }
  std::vector<Tensor<T>> skips;
  Tensor<T> x = run_double_conv(inc_, input, training);
  for (auto& down : downs_) {
    skips.push_back(x);
    x = run_double_conv(down, maxpool2d(x, 2, 2), training);
  }
  for (auto& up : ups_) {
    Tensor<T> u;
    switch (cfg_.upsample) {
      case UpsampleMode::transpose_dilated: {
        ConvTranspose2dOptions o{2, 2, 2, 1, cfg_.circular_width};
        u = conv_transpose2d(x, up.up.weight, up.up.bias, o);
        break;
      }
      case UpsampleMode::transpose: {
        ConvTranspose2dOptions o{2, 0, 1, 0, cfg_.circular_width};
        u = conv_transpose2d(x, up.up.weight, up.up.bias, o);
        break;
      }
      case UpsampleMode::nearest_upsample: {
        Conv2dOptions o;
        o.padding = 1;
        o.circular_width = cfg_.circular_width;
        u = conv2d(upsample_nearest2x(x), up.up.weight, up.up.bias, o);
        break;
      }
    }
    x = run_double_conv(up.block, concat_channels(skips.back(), u), training);
    skips.pop_back();
  }
  x = conv2d(x, head_.weight, head_.bias, Conv2dOptions{});
  return cfg_.head == OutputHead::sigmoid ? sigmoid(x) : x;
}

template <typename T>
std::size_t GNetModel<T>::count_parameters() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.tensor.numel();
  return n;
}

template <typename T>
std::vector<std::string> GNetModel<T>::encoder_parameter_names() const {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < encoder_param_count_; ++i) names.push_back(params_[i].name);
  return names;
}

namespace {

template <typename T>
NamedArray to_named(const std::string& name, const Tensor<T>& t) {
  NamedArray a{name, {}, std::vector<float>(t.numel())};
  for (int d : t.shape()) a.dims.push_back(static_cast<std::uint32_t>(d));
  const auto v = t.data();
  for (std::size_t i = 0; i < v.size(); ++i) a.data[i] = static_cast<float>(v[i]);
  return a;
}

template <typename T>
void from_named(const NamedArray& a, Tensor<T>& t, const std::string& expected) {
  if (a.name != expected) throw ShapeError("state entry '" + a.name + "' where '" + expected + "' was expected");
  Shape dims(a.dims.begin(), a.dims.end());
  if (dims != t.shape() || a.data.size() != t.numel()) {
    throw ShapeError("state entry '" + a.name + "' has shape " + shape_str(dims) + ", model expects " +
                     shape_str(t.shape()));
  }
  auto v = t.data();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<T>(a.data[i]);
}

}  // namespace

template <typename T>
std::vector<NamedArray> GNetModel<T>::state_dict() const {
  std::vector<NamedArray> out;
  for (const auto& p : params_) out.push_back(to_named(p.name, p.tensor));
  const_cast<GNetModel*>(this)->for_each_norm([&](Norm& n) {
    out.push_back(to_named(n.name + ".running_mean", n.stats.running_mean));
    out.push_back(to_named(n.name + ".running_var", n.stats.running_var));
  });
  return out;
}

template <typename T>
void GNetModel<T>::load_state_dict(const std::vector<NamedArray>& state) {
  std::size_t expected = params_.size();
  for_each_norm([&](Norm&) { expected += 2; });
  if (state.size() != expected) {
    throw ShapeError("state has " + std::to_string(state.size()) + " entries, model expects " +
                     std::to_string(expected));
  }
  std::size_t i = 0;
  for (auto& p : params_) {
    from_named(state[i], p.tensor, p.name);
    ++i;
  }
  for_each_norm([&](Norm& n) {
    from_named(state[i++], n.stats.running_mean, n.name + ".running_mean");
    from_named(state[i++], n.stats.running_var, n.name + ".running_var");
  });
}

template class GNetModel<float>;
template class GNetModel<double>;

}  // namespace spheremap
