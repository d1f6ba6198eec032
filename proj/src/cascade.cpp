// Copyright 2026 The slu-cascade Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "slu/cascade.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <map>

#include "slu/error.hpp"
#include "slu/kernels.hpp"
#include "slu/rng.hpp"

namespace slu {
namespace {

using nlohmann::json;

Tensor transposed(const Tensor& m) {
  Tensor out({m.dims()[1], m.dims()[0]});
  kernels::transpose(m.data().data(), out.data().data(), m.dims()[0], m.dims()[1]);
  return out;
}

void activate(Activation a, std::span<double> y) {
  switch (a) {
    case Activation::kRelu: kernels::apply_relu(y, y); break;
    case Activation::kTanh: kernels::apply_tanh(y, y); break;
    case Activation::kSigmoid: kernels::apply_sigmoid(y, y); break;
  }
}

Tensor log_softmax_rows(const Tensor& x) {
  Tensor out(x.dims());
  for (std::size_t r = 0; r < x.rows(); ++r) kernels::log_softmax_row(x.row(r), out.row(r));
  return out;
}

std::vector<LstmLayerParams> init_stack(const std::string& prefix, std::size_t in,
                                        std::size_t hidden, std::size_t layers, Rng& rng) {
  std::vector<LstmLayerParams> out;
  for (std::size_t l = 0; l < layers; ++l)
    out.push_back(LstmLayerParams::init(prefix + ".lstm" + std::to_string(l),
                                        l == 0 ? in : hidden, hidden, rng));
  return out;
}

void require_dims(const Tensor& t, std::size_t cols, const char* what) {
  if (t.rank() != 2 || t.cols() != cols)
    throw ShapeError(std::string(what) + ": expected [T x " + std::to_string(cols) + "], got " +
                     shape_to_string(t.dims()));
  if (t.rows() == 0) throw ContractError(std::string(what) + ": empty sequence");
}

}  // namespace

// --- dims ------------------------------------------------------------------

void CascadeDims::validate() const {
  if (feat_dim == 0 || num_phones == 0 || word_hidden == 0 || word_layers == 0 ||
      vocab_size < 2 || intent_hidden == 0 || intent_layers == 0 || num_intents == 0 ||
      subsample == 0)
    throw ConfigError("model dims must be positive (vocab_size >= 2)");
  if (conv.empty()) throw ConfigError("model needs at least one conv layer");
  for (const auto& [w, o] : conv)
    if (w == 0 || o == 0) throw ConfigError("conv width and output dim must be >= 1");
}

std::size_t CascadeDims::receptive_field() const {
  std::size_t r = 1;
  for (const auto& [w, _] : conv) r += w - 1;
  return r;
}

void to_json(json& j, const CascadeDims& d) {
  json conv = json::array();
  for (const auto& [w, o] : d.conv) conv.push_back({w, o});
  j = json{{"feat_dim", d.feat_dim},
           {"conv", conv},
           {"conv_activation", to_string(d.conv_activation)},
           {"num_phones", d.num_phones},
           {"word_hidden", d.word_hidden},
           {"word_layers", d.word_layers},
           {"vocab_size", d.vocab_size},
           {"intent_hidden", d.intent_hidden},
           {"intent_layers", d.intent_layers},
           {"num_intents", d.num_intents},
           {"subsample", d.subsample}};
}

void from_json(const json& j, CascadeDims& d) {
  auto get = [&j](const char* key, auto& field) {
    if (j.contains(key)) j.at(key).get_to(field);
  };
  try {
    get("feat_dim", d.feat_dim);
    if (j.contains("conv")) {
      d.conv.clear();
      for (const auto& e : j.at("conv"))
        d.conv.emplace_back(e.at(0).get<std::size_t>(), e.at(1).get<std::size_t>());
    }
    if (j.contains("conv_activation"))
      d.conv_activation = activation_from_string(j.at("conv_activation").get<std::string>());
    get("num_phones", d.num_phones);
    get("word_hidden", d.word_hidden);
    get("word_layers", d.word_layers);
    get("vocab_size", d.vocab_size);
    get("intent_hidden", d.intent_hidden);
    get("intent_layers", d.intent_layers);
    get("num_intents", d.num_intents);
    get("subsample", d.subsample);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid model dims: ") + e.what());
  }
}

// --- params ----------------------------------------------------------------

CascadeParams CascadeParams::init(const CascadeDims& dims, std::uint64_t seed) {
  dims.validate();
  CascadeParams p;
  p.dims = dims;
  Rng rp(derive_seed(seed, "init.phoneme"));
  p.theta_p.conv = CausalConvParams::init("p", dims.feat_dim, dims.conv, dims.conv_activation, rp);
  p.theta_p.proj = LinearParams::init("p.proj", dims.phone_embedding_dim(), dims.num_phones, rp);
  Rng rw(derive_seed(seed, "init.word"));
  p.theta_w.lstm =
      init_stack("w", dims.phone_embedding_dim(), dims.word_hidden, dims.word_layers, rw);
  p.theta_w.proj = LinearParams::init("w.proj", dims.word_hidden, dims.vocab_size, rw);
  Rng ru(derive_seed(seed, "init.intent"));
  p.theta_u.lstm = init_stack("u", dims.word_hidden, dims.intent_hidden, dims.intent_layers, ru);
  p.theta_u.proj = LinearParams::init("u.proj", dims.intent_hidden, dims.num_intents, ru);
  return p;
}

void CascadeParams::validate() const {
  dims.validate();
  auto check = [](const Parameter& prm, const Shape& want) {
    if (prm.value.dims() != want)
      throw ShapeError("parameter " + prm.name + " has shape " + shape_to_string(prm.value.dims()) +
                       ", expected " + shape_to_string(want));
  };
  if (theta_p.conv.layers.size() != dims.conv.size())
    throw ShapeError("phoneme module layer count disagrees with dims");
  std::size_t in = dims.feat_dim;
  for (std::size_t l = 0; l < dims.conv.size(); ++l) {
    const auto& layer = theta_p.conv.layers[l];
    check(layer.w, {dims.conv[l].second, dims.conv[l].first * in});
    check(layer.b, {dims.conv[l].second});
    in = dims.conv[l].second;
  }
  check(theta_p.proj.w, {dims.num_phones, in});
  if (theta_w.lstm.size() != dims.word_layers || theta_u.lstm.size() != dims.intent_layers)
    throw ShapeError("recurrent layer count disagrees with dims");
  for (std::size_t l = 0; l < theta_w.lstm.size(); ++l) {
    theta_w.lstm[l].validate();
    if (theta_w.lstm[l].input_dim != (l == 0 ? in : dims.word_hidden) ||
        theta_w.lstm[l].hidden_dim != dims.word_hidden)
      throw ShapeError("word module layer " + std::to_string(l) + " dims disagree");
  }
  check(theta_w.proj.w, {dims.vocab_size, dims.word_hidden});
  for (std::size_t l = 0; l < theta_u.lstm.size(); ++l) {
    theta_u.lstm[l].validate();
    if (theta_u.lstm[l].input_dim != (l == 0 ? dims.word_hidden : dims.intent_hidden) ||
        theta_u.lstm[l].hidden_dim != dims.intent_hidden)
      throw ShapeError("intent module layer " + std::to_string(l) + " dims disagree");
  }
  check(theta_u.proj.w, {dims.num_intents, dims.intent_hidden});
}

std::vector<Parameter*> CascadeParams::phoneme_parameters() {
  auto out = parameters(theta_p.conv);
  for (auto* q : parameters(theta_p.proj)) out.push_back(q);
  return out;
}

std::vector<Parameter*> CascadeParams::word_parameters() {
  std::vector<Parameter*> out;
  for (auto& l : theta_w.lstm)
    for (auto* q : parameters(l)) out.push_back(q);
  for (auto* q : parameters(theta_w.proj)) out.push_back(q);
  return out;
}

std::vector<Parameter*> CascadeParams::intent_parameters() {
  std::vector<Parameter*> out;
  for (auto& l : theta_u.lstm)
    for (auto* q : parameters(l)) out.push_back(q);
  for (auto* q : parameters(theta_u.proj)) out.push_back(q);
  return out;
}

std::vector<Parameter*> CascadeParams::all_parameters() {
  auto out = phoneme_parameters();
  for (auto* q : word_parameters()) out.push_back(q);
  for (auto* q : intent_parameters()) out.push_back(q);
  return out;
}

std::vector<const Parameter*> CascadeParams::all_parameters() const {
  auto ps = const_cast<CascadeParams*>(this)->all_parameters();
  return {ps.begin(), ps.end()};
}

bool params_equal(const CascadeParams& a, const CascadeParams& b) {
  if (!(a.dims == b.dims)) return false;
  const auto pa = a.all_parameters();
  const auto pb = b.all_parameters();
  if (pa.size() != pb.size()) return false;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    if (pa[i]->name != pb[i]->name || pa[i]->value.dims() != pb[i]->value.dims()) return false;
    if (std::memcmp(pa[i]->value.data().data(), pb[i]->value.data().data(),
                    pa[i]->value.size() * sizeof(double)) != 0)
      return false;
  }
  return true;
}

// --- numeric forward -------------------------------------------------------

PhonemeOutputs phoneme_forward(const PhonemeParams& p, const Tensor& xs) {
  require_dims(xs, p.conv.input_dim(), "phoneme_forward");
  PhonemeOutputs out;
  out.embedding = causal_conv_forward(p.conv, xs);
  out.logits = linear_forward(p.proj.w.value, p.proj.b.value, out.embedding);
  return out;
}

Tensor subsample_rows(const Tensor& xs, std::size_t k) {
  if (k == 0) throw ContractError("subsample factor must be >= 1");
  if (k == 1) return xs;
  const std::size_t rows = (xs.rows() + k - 1) / k;
  Tensor out({rows, xs.cols()});
  for (std::size_t r = 0; r < rows; ++r) {
    auto src = xs.row(r * k);
    std::copy(src.begin(), src.end(), out.row(r).begin());
  }
  return out;
}

WordOutputs word_forward(const WordParams& p, const Tensor& p_emb) {
  require_dims(p_emb, p.lstm.front().input_dim, "word_forward");
  WordOutputs out;
  out.embedding = lstm_stack_forward(p.lstm, p_emb);
  out.log_probs = log_softmax_rows(linear_forward(p.proj.w.value, p.proj.b.value, out.embedding));
  return out;
}

Tensor lu_forward(const IntentParams& p, const Tensor& w_emb) {
  require_dims(w_emb, p.lstm.front().input_dim, "lu_forward");
  const Tensor top = lstm_stack_forward(p.lstm, w_emb);
  Tensor last({1, top.cols()});
  auto src = top.row(top.rows() - 1);
  std::copy(src.begin(), src.end(), last.data().begin());
  Tensor logits = linear_forward(p.proj.w.value, p.proj.b.value, last);
  return Tensor({logits.size()}, logits.storage());
}

CascadeOutputs cascade_forward(const CascadeParams& p, const Tensor& xs) {
  CascadeOutputs out;
  out.phoneme = phoneme_forward(p.theta_p, xs);
  out.word = word_forward(p.theta_w, subsample_rows(out.phoneme.embedding, p.dims.subsample));
  out.intent_logits = lu_forward(p.theta_u, out.word.embedding);
  return out;
}

// --- graph forward ---------------------------------------------------------

PhonemeVars phoneme_forward(Graph& g, PhonemeParams& p, Var xs, bool trainable) {
  require_dims(xs.value(), p.conv.input_dim(), "phoneme_forward");
  Var emb = causal_conv_forward(g, p.conv, xs, trainable);
  return {emb, linear_forward(g, p.proj, emb, trainable)};
}

WordVars word_forward(Graph& g, WordParams& p, Var p_emb, const GraphOptions& opt) {
  require_dims(p_emb.value(), p.lstm.front().input_dim, "word_forward");
  Var emb = lstm_stack_forward(g, p.lstm, p_emb, opt.dropout, opt.training,
                               derive_seed(opt.dropout_seed, "word"), opt.train_w);
  return {emb, ad::log_softmax(linear_forward(g, p.proj, emb, opt.train_w))};
}

Var lu_forward(Graph& g, IntentParams& p, Var w_emb, const GraphOptions& opt) {
  require_dims(w_emb.value(), p.lstm.front().input_dim, "lu_forward");
  Var top = lstm_stack_forward(g, p.lstm, w_emb, opt.dropout, opt.training,
                               derive_seed(opt.dropout_seed, "intent"), opt.train_u);
  Var last = ad::row(top, top.value().rows() - 1);
  return linear_forward(g, p.proj, last, opt.train_u);
}

CascadeVars cascade_forward(Graph& g, CascadeParams& p, Var xs, const GraphOptions& opt) {
  CascadeVars out;
  out.phoneme = phoneme_forward(g, p.theta_p, xs, opt.train_p);
  Var p_emb = out.phoneme.embedding;
  if (p.dims.subsample > 1) {
    std::vector<std::size_t> keep;
    for (std::size_t t = 0; t < p_emb.value().rows(); t += p.dims.subsample) keep.push_back(t);
    p_emb = ad::embed(p_emb, keep);
  }
  out.word = word_forward(g, p.theta_w, p_emb, opt);
  out.intent_logits = lu_forward(g, p.theta_u, out.word.embedding, opt);
  return out;
}

// --- streaming -------------------------------------------------------------

CascadeRuntime::CascadeRuntime(const CascadeParams& p) : params_(&p) {
  p.validate();
  for (const auto& layer : p.theta_p.conv.layers)
    conv_.push_back({transposed(layer.w.value), &layer.b.value});
  phone_proj_ = {transposed(p.theta_p.proj.w.value), &p.theta_p.proj.b.value};
  for (const auto& l : p.theta_w.lstm) word_.emplace_back(l);
  word_proj_ = {transposed(p.theta_w.proj.w.value), &p.theta_w.proj.b.value};
  for (const auto& l : p.theta_u.lstm) intent_.emplace_back(l);
  intent_proj_ = {transposed(p.theta_u.proj.w.value), &p.theta_u.proj.b.value};
}

StreamingSession::StreamingSession(const CascadeRuntime& rt) : rt_(&rt) { reset(); }

void StreamingSession::reset() {
  const auto& p = rt_->params();
  history_.clear();
  for (const auto& layer : p.theta_p.conv.layers)
    history_.emplace_back(layer.width * layer.in_dim, 0.0);
  word_state_.clear();
  for (const auto& l : p.theta_w.lstm) word_state_.push_back(LstmState::zeros(l.hidden_dim));
  intent_state_.clear();
  for (const auto& l : p.theta_u.lstm) intent_state_.push_back(LstmState::zeros(l.hidden_dim));
  intent_logits_.clear();
  frames_seen_ = 0;
}

StreamOutput StreamingSession::push(std::span<const double> frame) {
  const auto& p = rt_->params();
  if (frame.size() != p.dims.feat_dim)
    throw ShapeError("stream_push: frame has " + std::to_string(frame.size()) +
                     " values, model expects " + std::to_string(p.dims.feat_dim));
  auto dense = [](const CascadeRuntime::Dense& d, std::span<const double> x) {
    const std::size_t out_dim = d.wt.cols();
    std::vector<double> y(out_dim);
    kernels::gemm(x.data(), d.wt.data().data(), y.data(), 1, x.size(), out_dim);
    kernels::add_bias(y, d.b->data(), y);
    return y;
  };

  StreamOutput out;
  out.frame = frames_seen_;
  std::vector<double> cur(frame.begin(), frame.end());
  for (std::size_t l = 0; l < history_.size(); ++l) {
    const auto& layer = p.theta_p.conv.layers[l];
    auto& hist = history_[l];
    // Shift the window left by one frame and append the newest input.
    std::copy(hist.begin() + static_cast<std::ptrdiff_t>(layer.in_dim), hist.end(), hist.begin());
    std::copy(cur.begin(), cur.end(), hist.end() - static_cast<std::ptrdiff_t>(layer.in_dim));
    cur = dense(rt_->conv_[l], hist);
    activate(p.theta_p.conv.activation, cur);
  }
  out.phone_logits = dense(rt_->phone_proj_, cur);

  if (frames_seen_ % p.dims.subsample == 0) {
    for (std::size_t l = 0; l < rt_->word_.size(); ++l) {
      word_state_[l] = rt_->word_[l].step(cur, word_state_[l]);
      cur = word_state_[l].h.storage();
    }
    std::vector<double> logits = dense(rt_->word_proj_, cur);
    std::vector<double> lp(logits.size());
    kernels::log_softmax_row(logits, lp);
    out.wp_log_probs = std::move(lp);
    for (std::size_t l = 0; l < rt_->intent_.size(); ++l) {
      intent_state_[l] = rt_->intent_[l].step(cur, intent_state_[l]);
      cur = intent_state_[l].h.storage();
    }
    intent_logits_ = dense(rt_->intent_proj_, cur);
  }
  out.intent_logits = intent_logits_;
  ++frames_seen_;
  return out;
}

// --- checkpoints -----------------------------------------------------------

namespace {

template <typename T>
void put(std::ostream& os, T v) {
  unsigned char b[sizeof(T)];
  std::uint64_t bits = 0;
  if constexpr (std::is_floating_point_v<T>) {
    std::memcpy(&bits, &v, sizeof(T));
  } else {
    bits = static_cast<std::uint64_t>(v);
  }
  for (std::size_t i = 0; i < sizeof(T); ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), sizeof(T));
}

template <typename T>
T get(std::istream& is, const std::string& path) {
  unsigned char b[sizeof(T)];
  if (!is.read(reinterpret_cast<char*>(b), sizeof(T)))
    throw IoError("truncated checkpoint " + path);
  std::uint64_t bits = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  if constexpr (std::is_floating_point_v<T>) {
    T v;
    std::memcpy(&v, &bits, sizeof(T));
    return v;
  } else {
    return static_cast<T>(bits);
  }
}

std::vector<double> encode_dims(const CascadeDims& d) {
  std::vector<double> v{static_cast<double>(d.feat_dim), static_cast<double>(d.conv.size())};
  for (const auto& [w, o] : d.conv) {
    v.push_back(static_cast<double>(w));
    v.push_back(static_cast<double>(o));
  }
  for (std::size_t x : {static_cast<std::size_t>(d.conv_activation), d.num_phones, d.word_hidden,
                        d.word_layers, d.vocab_size, d.intent_hidden, d.intent_layers,
                        d.num_intents, d.subsample})
    v.push_back(static_cast<double>(x));
  return v;
}

CascadeDims decode_dims(const std::vector<double>& v) {
  auto at = [&v](std::size_t i) {
    if (i >= v.size()) throw FormatError("checkpoint: meta.dims too short");
    return static_cast<std::size_t>(v[i]);
  };
  CascadeDims d;
  d.feat_dim = at(0);
  const std::size_t n = at(1);
  d.conv.clear();
  std::size_t i = 2;
  for (std::size_t l = 0; l < n; ++l, i += 2) d.conv.emplace_back(at(i), at(i + 1));
  const std::size_t act = at(i++);
  if (act > 2) throw FormatError("checkpoint: unknown activation code");
  d.conv_activation = static_cast<Activation>(act);
  d.num_phones = at(i++);
  d.word_hidden = at(i++);
  d.word_layers = at(i++);
  d.vocab_size = at(i++);
  d.intent_hidden = at(i++);
  d.intent_layers = at(i++);
  d.num_intents = at(i++);
  d.subsample = at(i++);
  if (i != v.size()) throw FormatError("checkpoint: meta.dims has trailing values");
  try {
    d.validate();
  } catch (const ConfigError& e) {
    throw FormatError(std::string("checkpoint: ") + e.what());
  }
  return d;
}

void write_param(std::ostream& os, const std::string& name, const Tensor& t) {
  put<std::uint16_t>(os, static_cast<std::uint16_t>(name.size()));
  os.write(name.data(), static_cast<std::streamsize>(name.size()));
  put<std::uint8_t>(os, static_cast<std::uint8_t>(t.rank()));
  for (auto d : t.dims()) put<std::uint32_t>(os, static_cast<std::uint32_t>(d));
  for (double v : t.data()) put<double>(os, v);
}

}  // namespace

void save_tensors(const NamedTensors& tensors, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write checkpoint " + path.string());
  os.write("SLUC", 4);
  put<std::uint32_t>(os, CascadeParams::kVersion);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) write_param(os, name, t);
  if (!os) throw IoError("failed writing checkpoint " + path.string());
}

NamedTensors load_tensors(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot read checkpoint " + path.string());
  const std::string where = path.string();
  char magic[4];
  if (!is.read(magic, 4)) throw IoError("truncated checkpoint " + where);
  if (std::memcmp(magic, "SLUC", 4) != 0) throw FormatError("bad checkpoint magic in " + where);
  const auto version = get<std::uint32_t>(is, where);
  if (version != CascadeParams::kVersion)
    throw FormatError("checkpoint version " + std::to_string(version) + " unsupported (expected " +
                      std::to_string(CascadeParams::kVersion) + ")");
  const auto count = get<std::uint32_t>(is, where);
  NamedTensors out;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = get<std::uint16_t>(is, where);
    std::string name(len, '\0');
    if (!is.read(name.data(), len)) throw IoError("truncated checkpoint " + where);
    const auto rank = get<std::uint8_t>(is, where);
    if (rank < 1 || rank > 3) throw FormatError("checkpoint: bad rank for " + name);
    Shape dims;
    for (std::uint8_t r = 0; r < rank; ++r) dims.push_back(get<std::uint32_t>(is, where));
    if (std::find(dims.begin(), dims.end(), 0u) != dims.end())
      throw FormatError("checkpoint: zero dimension in " + name);
    std::vector<double> data(shape_size(dims));
    for (double& v : data) v = get<double>(is, where);
    out.emplace_back(std::move(name), Tensor(dims, std::move(data)));
  }
  return out;
}

void save_checkpoint(const CascadeParams& p, const std::filesystem::path& path) {
  p.validate();
  NamedTensors tensors;
  tensors.emplace_back("meta.dims", Tensor::vector(encode_dims(p.dims)));
  for (const auto* q : p.all_parameters()) tensors.emplace_back(q->name, q->value);
  save_tensors(tensors, path);
}

CascadeParams load_checkpoint(const std::filesystem::path& path) {
  std::map<std::string, Tensor> tensors;
  for (auto& [name, t] : load_tensors(path)) tensors[name] = std::move(t);
  auto meta = tensors.find("meta.dims");
  if (meta == tensors.end()) throw FormatError("checkpoint: missing meta.dims");
  CascadeParams p = CascadeParams::init(decode_dims(meta->second.storage()), 0);
  for (auto* q : p.all_parameters()) {
    auto it = tensors.find(q->name);
    if (it == tensors.end()) throw FormatError("checkpoint: missing parameter " + q->name);
    if (it->second.dims() != q->value.dims())
      throw FormatError("checkpoint: parameter " + q->name + " has shape " +
                        shape_to_string(it->second.dims()) + ", expected " +
                        shape_to_string(q->value.dims()));
    q->value = std::move(it->second);
    q->zero_grad();
  }
  return p;
}

}  // namespace slu
