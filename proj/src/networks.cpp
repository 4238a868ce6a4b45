#include "purekit/networks.hpp"

#include <cmath>

#include "purekit/errors.hpp"

namespace purekit {

namespace {

int64_t pow2(int e) { return int64_t{1} << e; }

// Largest divisor of c not exceeding 8 that still leaves at least 8 elements
// per normalization slab; tiny feature maps degrade toward layer norm so the
// statistics stay informative.
int pick_norm_groups(int64_t c, int64_t hw) {
  for (int g = static_cast<int>(std::min<int64_t>(8, c)); g >= 1; --g) {
    if (c % g == 0 && (c / g) * hw >= 8) return g;
  }
  return 1;
}

int pick_norm_groups(const ag::Var& x) {
  return pick_norm_groups(x->value.size(1), x->value.size(2) * x->value.size(3));
}

struct ParamAccess {
  const VarMap& vars;
  ag::Var operator()(const std::string& name) const {
    auto it = vars.find(name);
    if (it == vars.end()) throw_parameter("missing parameter tensor: " + name);
    return it->second;
  }
};

struct ParamInit {
  ParameterSet& ps;
  Rng& rng;

  void conv(const std::string& name, int64_t co, int64_t ci, int kh, int kw,
            double gain = 1.0) {
    Tensor w({co, ci, kh, kw});
    double std = gain * std::sqrt(2.0 / static_cast<double>(ci * kh * kw));
    for (int64_t i = 0; i < w.numel(); ++i) w[i] = std * rng.normal();
    put(name + ".w", std::move(w));
    put(name + ".b", Tensor({co}));
  }

  void dense(const std::string& name, int64_t in, int64_t out, double std) {
    Tensor w({in, out});
    for (int64_t i = 0; i < w.numel(); ++i) w[i] = std * rng.normal();
    put(name + ".w", std::move(w));
    put(name + ".b", Tensor({out}));
  }

  // modulation layers start at identity: zero weights, zero bias
  void style(const std::string& name, int64_t in, int64_t out) {
    put(name + ".w", Tensor({in, out}));
    put(name + ".b", Tensor({out}));
  }

  void put(const std::string& name, Tensor t) {
    if (!ps.emplace(name, std::move(t)).second) {
      throw_parameter("duplicate parameter name: " + name);
    }
  }
};

std::string lvl(const std::string& base, int l) { return base + std::to_string(l); }

}  // namespace

void GeneratorConfig::validate() const {
  if (latent_dim < 1) throw_parameter("generator: latent_dim must be >= 1");
  if (embedding_dim < 1) throw_parameter("generator: embedding_dim must be >= 1");
  if (base_channels < 1) throw_parameter("generator: base_channels must be >= 1");
  if (channel_multipliers.empty()) {
    throw_parameter("generator: channel_multipliers must be nonempty");
  }
  if (res_blocks_per_level < 1) throw_parameter("generator: res_blocks_per_level >= 1");
  int64_t div = pow2(levels() - 1);
  if (image_shape[1] % div != 0 || image_shape[2] % div != 0) {
    throw_parameter("generator: image size must be divisible by 2^(levels-1)");
  }
}

void DiscriminatorConfig::validate() const {
  if (base_channels < 1 || levels < 1) throw_parameter("discriminator: bad config");
  int64_t div = pow2(levels);
  if (image_shape[1] % div != 0 || image_shape[2] % div != 0) {
    throw_parameter("discriminator: image size must be divisible by 2^levels");
  }
}

void ClassifierConfig::validate() const {
  if (class_count < 2) throw_parameter("classifier: class_count must be >= 2");
  if (base_channels < 1 || blocks_per_stage < 1 || stages < 1) {
    throw_parameter("classifier: bad config");
  }
  int64_t div = pow2(stages - 1);
  if (image_shape[1] % div != 0 || image_shape[2] % div != 0) {
    throw_parameter("classifier: image size must be divisible by 2^(stages-1)");
  }
}

int64_t param_count(const ParameterSet& ps) {
  int64_t n = 0;
  for (const auto& [name, t] : ps) n += t.numel();
  return n;
}

VarMap as_leaves(const ParameterSet& ps) {
  VarMap out;
  for (const auto& [name, t] : ps) out.emplace(name, ag::leaf(t));
  return out;
}

VarMap as_constants(const ParameterSet& ps) {
  VarMap out;
  for (const auto& [name, t] : ps) out.emplace(name, ag::constant(t));
  return out;
}

// --------------------------------------------------------------- construction

namespace {

void init_res_block(ParamInit& init, const std::string& prefix, int64_t embed,
                    int64_t in_ch, int64_t out_ch) {
  init.style(prefix + ".style1", embed, 2 * in_ch);
  init.conv(prefix + ".conv1", out_ch, in_ch, 3, 3);
  init.style(prefix + ".style2", embed, 2 * out_ch);
  init.conv(prefix + ".conv2", out_ch, out_ch, 3, 3);
  if (in_ch != out_ch) init.conv(prefix + ".skip", out_ch, in_ch, 1, 1);
}

void init_unet(ParamInit& init, const GeneratorConfig& cfg) {
  int64_t cin = cfg.image_shape[0];
  int64_t embed = cfg.embedding_dim;
  int levels = cfg.levels();
  auto ch = [&](int l) {
    return static_cast<int64_t>(cfg.base_channels) * cfg.channel_multipliers[static_cast<size_t>(l)];
  };
  init.conv("stem", ch(0), cin, 3, 3);
  for (int l = 0; l < levels; ++l) {
    if (l > 0) init.conv(lvl("down", l - 1), ch(l), ch(l - 1), 3, 3);
    for (int b = 0; b < cfg.res_blocks_per_level; ++b) {
      init_res_block(init, lvl("enc", l) + lvl(".res", b), embed, ch(l), ch(l));
    }
  }
  int64_t bottleneck = cfg.image_shape[1] / pow2(levels - 1);
  bool attn = false;
  for (int r : cfg.attention_resolutions) attn |= (r == bottleneck);
  if (attn) {
    int64_t c = ch(levels - 1);
    init.conv("attn.q", c, c, 1, 1);
    init.conv("attn.k", c, c, 1, 1);
    init.conv("attn.v", c, c, 1, 1);
    init.conv("attn.o", c, c, 1, 1, /*gain=*/0.2);
  }
  for (int l = levels - 2; l >= 0; --l) {
    init.conv(lvl("up", l), ch(l), ch(l + 1), 3, 3);
    for (int b = 0; b < cfg.res_blocks_per_level; ++b) {
      int64_t in_ch = b == 0 ? 2 * ch(l) : ch(l);
      init_res_block(init, lvl("dec", l) + lvl(".res", b), embed, in_ch, ch(l));
    }
  }
  init.conv("head", cin, ch(0), 3, 3, /*gain=*/0.5);
}

}  // namespace

ParameterSet init_generator(const GeneratorConfig& cfg, Rng& rng) {
  cfg.validate();
  ParameterSet ps;
  ParamInit init{ps, rng};
  double std1 = std::sqrt(2.0 / cfg.latent_dim);
  double std2 = std::sqrt(2.0 / cfg.embedding_dim);
  init.dense("map.fc1", cfg.latent_dim, cfg.embedding_dim, std1);
  init.dense("map.fc2", cfg.embedding_dim, cfg.embedding_dim, std2);
  init_unet(init, cfg);
  return ps;
}

ParameterSet init_denoiser(const GeneratorConfig& cfg, int timesteps, Rng& rng) {
  cfg.validate();
  if (timesteps < 1) throw_parameter("denoiser: timesteps must be >= 1");
  ParameterSet ps;
  ParamInit init{ps, rng};
  Tensor table({timesteps, cfg.embedding_dim});
  for (int64_t i = 0; i < table.numel(); ++i) table[i] = 0.02 * rng.normal();
  init.put("temb.table", std::move(table));
  init_unet(init, cfg);
  return ps;
}

ParameterSet init_discriminator(const DiscriminatorConfig& cfg, Rng& rng) {
  cfg.validate();
  ParameterSet ps;
  ParamInit init{ps, rng};
  int64_t cin = 2 * cfg.image_shape[0];
  int64_t ch = cfg.base_channels;
  init.conv("stem", ch, cin, 3, 3);
  for (int l = 0; l < cfg.levels; ++l) {
    init.conv(lvl("d", l) + ".conv", ch, ch, 3, 3);
    init.conv(lvl("d", l) + ".down", 2 * ch, ch, 3, 3);
    ch *= 2;
  }
  init.dense("fc", ch, 1, std::sqrt(1.0 / static_cast<double>(ch)));
  return ps;
}

ParameterSet init_classifier(const ClassifierConfig& cfg, Rng& rng) {
  cfg.validate();
  ParameterSet ps;
  ParamInit init{ps, rng};
  int64_t ch = cfg.base_channels;
  init.conv("stem", ch, cfg.image_shape[0], 3, 3);
  for (int s = 0; s < cfg.stages; ++s) {
    if (s > 0) {
      init.conv(lvl("down", s - 1), 2 * ch, ch, 3, 3);
      ch *= 2;
    }
    for (int b = 0; b < cfg.blocks_per_stage; ++b) {
      std::string prefix = lvl("s", s) + lvl(".b", b);
      init.conv(prefix + ".conv1", ch, ch, 3, 3);
      init.conv(prefix + ".conv2", ch, ch, 3, 3);
    }
  }
  int64_t head_in = ch;
  if (cfg.flatten_head) {
    int64_t hf = cfg.image_shape[1] / pow2(cfg.stages - 1);
    int64_t wf = cfg.image_shape[2] / pow2(cfg.stages - 1);
    head_in = ch * hf * wf;
  }
  init.dense("fc", head_in, cfg.class_count,
             std::sqrt(1.0 / static_cast<double>(head_in)));
  return ps;
}

// ------------------------------------------------------------------- forwards

namespace {

ag::Var conv_layer(const ParamAccess& p, const std::string& name, const ag::Var& x,
                   int stride, int pad) {
  return ag::conv2d(x, p(name + ".w"), p(name + ".b"), stride, pad);
}

// normalization + latent-conditioned scale/shift + leaky relu + conv
ag::Var modulated_conv(const ParamAccess& p, const std::string& style,
                       const std::string& conv, const ag::Var& x, const ag::Var& emb) {
  int64_t c = x->value.size(1);
  ag::Var h = ag::group_norm(x, pick_norm_groups(x), 1e-5);
  ag::Var mod = ag::linear(emb, p(style + ".w"), p(style + ".b"));
  ag::Var scale = ag::add_scalar(ag::slice_cols(mod, 0, c), 1.0);
  ag::Var shift = ag::slice_cols(mod, c, c);
  h = ag::channel_affine(h, scale, shift);
  h = ag::leaky_relu(h, 0.2);
  return conv_layer(p, conv, h, 1, 1);
}

ag::Var res_block(const ParamAccess& p, const std::string& prefix, const ag::Var& x,
                  const ag::Var& emb, int64_t out_ch) {
  ag::Var h = modulated_conv(p, prefix + ".style1", prefix + ".conv1", x, emb);
  h = modulated_conv(p, prefix + ".style2", prefix + ".conv2", h, emb);
  ag::Var skip = x;
  if (x->value.size(1) != out_ch) {
    skip = ag::conv2d(x, p(prefix + ".skip.w"), p(prefix + ".skip.b"), 1, 0);
  }
  return ag::add(h, skip);
}

ag::Var attention_block(const ParamAccess& p, const ag::Var& x) {
  int64_t n = x->value.size(0), c = x->value.size(1);
  int64_t hw = x->value.size(2) * x->value.size(3);
  ag::Var q = ag::reshape(conv_layer(p, "attn.q", x, 1, 0), {n, c, hw});
  ag::Var k = ag::reshape(conv_layer(p, "attn.k", x, 1, 0), {n, c, hw});
  ag::Var v = ag::reshape(conv_layer(p, "attn.v", x, 1, 0), {n, c, hw});
  ag::Var logits = ag::mul_scalar(ag::bmm(ag::transpose_last2(q), k),
                                  1.0 / std::sqrt(static_cast<double>(c)));
  ag::Var attn = ag::softmax_lastdim(logits);  // (n, hw, hw), rows index queries
  ag::Var out = ag::bmm(v, ag::transpose_last2(attn));
  out = ag::reshape(out, x->value.shape());
  out = conv_layer(p, "attn.o", out, 1, 0);
  return ag::add(x, out);
}

ag::Var unet_forward(const ParamAccess& p, const GeneratorConfig& cfg, const ag::Var& x,
                     const ag::Var& emb, bool squash_output) {
  int levels = cfg.levels();
  auto ch = [&](int l) {
    return static_cast<int64_t>(cfg.base_channels) * cfg.channel_multipliers[static_cast<size_t>(l)];
  };
  ag::Var h = conv_layer(p, "stem", x, 1, 1);
  std::vector<ag::Var> skips;
  for (int l = 0; l < levels; ++l) {
    if (l > 0) h = conv_layer(p, lvl("down", l - 1), h, 2, 1);
    for (int b = 0; b < cfg.res_blocks_per_level; ++b) {
      h = res_block(p, lvl("enc", l) + lvl(".res", b), h, emb, ch(l));
    }
    if (l < levels - 1) skips.push_back(h);
  }
  int64_t bottleneck = cfg.image_shape[1] / pow2(levels - 1);
  for (int r : cfg.attention_resolutions) {
    if (r == bottleneck) {
      h = attention_block(p, h);
      break;
    }
  }
  for (int l = levels - 2; l >= 0; --l) {
    h = ag::upsample_nearest2x(h);
    h = conv_layer(p, lvl("up", l), h, 1, 1);
    h = ag::concat_channels(h, skips[static_cast<size_t>(l)]);
    for (int b = 0; b < cfg.res_blocks_per_level; ++b) {
      h = res_block(p, lvl("dec", l) + lvl(".res", b), h, emb, ch(l));
    }
  }
  h = ag::leaky_relu(ag::group_norm(h, pick_norm_groups(h), 1e-5), 0.2);
  h = conv_layer(p, "head", h, 1, 1);
  return squash_output ? ag::tanh_op(h) : h;
}

void check_image(const std::array<int64_t, 3>& want, const Tensor& got,
                 const char* who) {
  if (got.rank() != 4 || got.size(1) != want[0] || got.size(2) != want[1] ||
      got.size(3) != want[2]) {
    throw_parameter(std::string(who) + ": image shape " + shape_str(got.shape()) +
                    " does not match configured " +
                    shape_str({want[0], want[1], want[2]}));
  }
}

}  // namespace

ag::Var generator_forward(const VarMap& params, const GeneratorConfig& cfg,
                          const ag::Var& x2, const ag::Var& z) {
  cfg.validate();
  check_image(cfg.image_shape, x2->value, "generator");
  if (z->value.rank() != 2 || z->value.size(0) != x2->value.size(0) ||
      z->value.size(1) != cfg.latent_dim) {
    throw_parameter("generator: latent shape mismatch, want (N," +
                    std::to_string(cfg.latent_dim) + ")");
  }
  ParamAccess p{params};
  ag::Var e = ag::leaky_relu(ag::linear(z, p("map.fc1.w"), p("map.fc1.b")), 0.2);
  e = ag::leaky_relu(ag::linear(e, p("map.fc2.w"), p("map.fc2.b")), 0.2);
  return unet_forward(p, cfg, x2, e, /*squash_output=*/true);
}

Tensor generator_forward(const ParameterSet& params, const GeneratorConfig& cfg,
                         const Tensor& x2, const Tensor& z) {
  if (x2.rank() != 3) throw_parameter("generator: expected a (C,H,W) image");
  if (z.rank() != 1) throw_parameter("generator: expected a flat latent vector");
  Shape s = x2.shape();
  ag::Var out = generator_forward(as_constants(params), cfg,
                                  ag::constant(x2.reshaped({1, s[0], s[1], s[2]})),
                                  ag::constant(z.reshaped({1, z.numel()})));
  return out->value.reshaped(s);
}

ag::Var discriminator_forward(const VarMap& params, const DiscriminatorConfig& cfg,
                              const ag::Var& x, const ag::Var& x_cond) {
  cfg.validate();
  check_image(cfg.image_shape, x->value, "discriminator");
  if (!x->value.same_shape(x_cond->value)) {
    throw_parameter("discriminator: sample and condition shapes differ");
  }
  ParamAccess p{params};
  ag::Var h = ag::concat_channels(x, x_cond);
  h = ag::leaky_relu(conv_layer(p, "stem", h, 1, 1), 0.2);
  for (int l = 0; l < cfg.levels; ++l) {
    h = ag::leaky_relu(conv_layer(p, lvl("d", l) + ".conv", h, 1, 1), 0.2);
    h = ag::leaky_relu(conv_layer(p, lvl("d", l) + ".down", h, 2, 1), 0.2);
  }
  h = ag::global_avg_pool(h);
  h = ag::linear(h, p("fc.w"), p("fc.b"));
  // clamp keeps the sigmoid strictly inside (0,1) in double precision
  h = ag::sigmoid(ag::clamp(h, -16.0, 16.0));
  return ag::reshape(h, {h->value.size(0)});
}

double discriminator_forward(const ParameterSet& params, const DiscriminatorConfig& cfg,
                             const Tensor& x, const Tensor& x_cond) {
  Shape s = x.shape();
  if (x.rank() != 3) throw_parameter("discriminator: expected a (C,H,W) image");
  ag::Var out = discriminator_forward(
      as_constants(params), cfg, ag::constant(x.reshaped({1, s[0], s[1], s[2]})),
      ag::constant(x_cond.reshaped({1, s[0], s[1], s[2]})));
  return out->value.item();
}

ag::Var classifier_forward(const VarMap& params, const ClassifierConfig& cfg,
                           const ag::Var& x) {
  cfg.validate();
  check_image(cfg.image_shape, x->value, "classifier");
  ParamAccess p{params};
  ag::Var h = conv_layer(p, "stem", x, 1, 1);
  int64_t ch = cfg.base_channels;
  for (int s = 0; s < cfg.stages; ++s) {
    if (s > 0) {
      h = conv_layer(p, lvl("down", s - 1), h, 2, 1);
      ch *= 2;
    }
    for (int b = 0; b < cfg.blocks_per_stage; ++b) {
      std::string prefix = lvl("s", s) + lvl(".b", b);
      ag::Var t = cfg.use_norm ? ag::group_norm(h, pick_norm_groups(h), 1e-5) : h;
      t = conv_layer(p, prefix + ".conv1", ag::relu(t), 1, 1);
      if (cfg.use_norm) t = ag::group_norm(t, pick_norm_groups(t), 1e-5);
      t = conv_layer(p, prefix + ".conv2", ag::relu(t), 1, 1);
      h = ag::add(h, t);
    }
  }
  if (cfg.use_norm) h = ag::group_norm(h, pick_norm_groups(h), 1e-5);
  h = ag::relu(h);
  if (cfg.flatten_head) {
    const Shape& hs = h->value.shape();
    h = ag::reshape(h, {hs[0], hs[1] * hs[2] * hs[3]});
  } else {
    h = ag::global_avg_pool(h);
  }
  return ag::linear(h, p("fc.w"), p("fc.b"));
}

Tensor classifier_forward(const ParameterSet& params, const ClassifierConfig& cfg,
                          const Tensor& x) {
  if (x.rank() != 3) throw_parameter("classifier: expected a (C,H,W) image");
  Shape s = x.shape();
  ag::Var out = classifier_forward(as_constants(params), cfg,
                                   ag::constant(x.reshaped({1, s[0], s[1], s[2]})));
  return out->value.reshaped({out->value.size(1)});
}

ag::Var denoiser_forward(const VarMap& params, const GeneratorConfig& cfg,
                         int timesteps, const ag::Var& x_t, int t) {
  cfg.validate();
  check_image(cfg.image_shape, x_t->value, "denoiser");
  if (t < 1 || t > timesteps) throw_parameter("denoiser: step index out of range");
  ParamAccess p{params};
  ag::Var row = ag::select_row(p("temb.table"), t - 1);
  ag::Var emb = ag::repeat_rows(row, x_t->value.size(0));
  return unet_forward(p, cfg, x_t, emb, /*squash_output=*/false);
}

Tensor denoiser_forward(const ParameterSet& params, const GeneratorConfig& cfg,
                        int timesteps, const Tensor& x_t, int t) {
  if (x_t.rank() != 3) throw_parameter("denoiser: expected a (C,H,W) image");
  Shape s = x_t.shape();
  ag::Var out = denoiser_forward(as_constants(params), cfg, timesteps,
                                 ag::constant(x_t.reshaped({1, s[0], s[1], s[2]})), t);
  return out->value.reshaped(s);
}

}  // namespace purekit
