#include "namegate/baselines.hpp"

#include <algorithm>
#include <cmath>

#include "namegate/ctc.hpp"
#include "namegate/ops.hpp"
#include "namegate/rng.hpp"

namespace namegate {
namespace {

template <typename T>
BasicMatrix<T> uniform_init(std::size_t rows, std::size_t cols, std::size_t fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  BasicMatrix<T> m(rows, cols);
  for (T& v : m.data()) v = static_cast<T>(rng.uniform(-bound, bound));
  return m;
}

// Eval-mode batchnorm with running statistics.
template <typename T>
BasicMatrix<T> batchnorm_running(const MlpParams<T>& p, const BasicMatrix<T>& x) {
  BasicMatrix<T> out(x.rows(), x.cols());
  for (std::size_t j = 0; j < x.cols(); ++j) {
    const T inv_std = T{1} / std::sqrt(p.running_var[j] + static_cast<T>(p.eps));
    for (std::size_t i = 0; i < x.rows(); ++i) {
      out(i, j) = p.gamma.value[j] * (x(i, j) - p.running_mean[j]) * inv_std + p.beta.value[j];
    }
  }
  return out;
}

template <typename T>
void update_running(MlpParams<T>& p, const BatchStats<T>& stats, std::size_t batch) {
  const T m = static_cast<T>(p.momentum);
  const T unbias = static_cast<T>(batch) / static_cast<T>(batch - 1);
  for (std::size_t j = 0; j < stats.mean.size(); ++j) {
    p.running_mean[j] = (T{1} - m) * p.running_mean[j] + m * stats.mean[j];
    p.running_var[j] = (T{1} - m) * p.running_var[j] + m * stats.var[j] * unbias;
  }
}

}  // namespace

template <typename T>
MlpParams<T> init_mlp(std::size_t input_dim, std::size_t classes, std::size_t hidden,
                      std::uint64_t seed) {
  if (input_dim < 1 || classes < 2 || hidden < 1) {
    throw ConfigError("init_mlp: need input_dim >= 1, hidden >= 1 and at least 2 classes");
  }
  Rng rng(seed);
  MlpParams<T> p;
  p.hidden_weight = Param<T>("W1", uniform_init<T>(input_dim, hidden, input_dim, rng));
  p.hidden_bias = Param<T>("b1", BasicMatrix<T>(1, hidden));
  p.gamma = Param<T>("gamma", BasicMatrix<T>(1, hidden, T{1}));
  p.beta = Param<T>("beta", BasicMatrix<T>(1, hidden));
  p.output_weight = Param<T>("W2", uniform_init<T>(hidden, classes, hidden, rng));
  p.output_bias = Param<T>("b2", BasicMatrix<T>(1, classes));
  p.running_mean = BasicMatrix<T>(1, hidden);
  p.running_var = BasicMatrix<T>(1, hidden, T{1});
  return p;
}

template <typename T>
MlpTrace<T> mlp_forward_trace(MlpParams<T>& p, const BasicMatrix<T>& pooled, bool training) {
  MlpTrace<T> trace;
  if (training) {
    if (pooled.rows() < 2) {
      throw ShapeError("mlp_forward: training mode needs a batch of at least 2, got " +
                       std::to_string(pooled.rows()));
    }
    Tape<T> tape;
    BatchStats<T> stats;
    const Var lin = tape.add_bias(tape.matmul(tape.constant(pooled), tape.leaf(p.hidden_weight)),
                                  tape.leaf(p.hidden_bias));
    const Var bn = tape.batchnorm(lin, tape.leaf(p.gamma), tape.leaf(p.beta), p.eps, &stats);
    trace.linear = tape.value(lin);
    trace.normalized = tape.value(bn);
    update_running(p, stats, pooled.rows());
  } else {
    trace.linear = add_bias(matmul(pooled, p.hidden_weight.value), p.hidden_bias.value);
    trace.normalized = batchnorm_running(p, trace.linear);
  }
  trace.activated = relu(trace.normalized);
  trace.logits = add_bias(matmul(trace.activated, p.output_weight.value), p.output_bias.value);
  return trace;
}

template <typename T>
BasicMatrix<T> mlp_forward(MlpParams<T>& p, const BasicMatrix<T>& pooled, bool training) {
  return mlp_forward_trace(p, pooled, training).logits;
}

template <typename T>
BasicMatrix<T> mlp_forward_eval(const MlpParams<T>& p, const BasicMatrix<T>& pooled) {
  const auto lin = add_bias(matmul(pooled, p.hidden_weight.value), p.hidden_bias.value);
  const auto act = relu(batchnorm_running(p, lin));
  return add_bias(matmul(act, p.output_weight.value), p.output_bias.value);
}

template <typename T>
Var record_mlp_loss(Tape<T>& tape, MlpParams<T>& p, const BasicMatrix<T>& pooled,
                    const std::vector<std::size_t>& labels, bool update) {
  if (pooled.rows() < 2) {
    throw ShapeError("mlp loss: batch of " + std::to_string(pooled.rows()) +
                     " is too small for batch statistics");
  }
  BatchStats<T> stats;
  const Var lin = tape.add_bias(tape.matmul(tape.constant(pooled), tape.leaf(p.hidden_weight)),
                                tape.leaf(p.hidden_bias));
  const Var bn = tape.batchnorm(lin, tape.leaf(p.gamma), tape.leaf(p.beta), p.eps, &stats);
  const Var logits = tape.add_bias(tape.matmul(tape.relu(bn), tape.leaf(p.output_weight)),
                                   tape.leaf(p.output_bias));
  if (update) update_running(p, stats, pooled.rows());
  return tape.softmax_cross_entropy(logits, labels);
}

PromptLabel label_from_logits(std::span<const float> logits, const LabelSpace& labels) {
  if (logits.size() != labels.class_count()) {
    throw ShapeError("classify: " + std::to_string(logits.size()) + " logits for " +
                     std::to_string(labels.class_count()) + " classes");
  }
  std::size_t best = 0;
  for (std::size_t j = 1; j < logits.size(); ++j)
    if (logits[j] > logits[best]) best = j;
  return labels.label_at(best);
}

template <typename T>
PromptLabel classify(const MlpParams<T>& p, const BasicMatrix<T>& pooled, const LabelSpace& labels) {
  if (pooled.rows() != 1) throw ShapeError("classify: expected one row, got " + pooled.shape_string());
  const auto logits = mlp_forward_eval(p, pooled);
  if (logits.cols() != labels.class_count()) {
    throw ShapeError("classify: model has " + std::to_string(logits.cols()) +
                     " classes, label space has " + std::to_string(labels.class_count()));
  }
  return labels.label_at(argmax_row(logits, 0));
}

// ---------------------------------------------------------------------------

Alphabet::Alphabet(std::vector<std::string> symbols, bool accents)
    : symbols_(std::move(symbols)), accents_(accents) {}

Alphabet Alphabet::folded() {
  std::vector<std::string> s{""};
  for (char c = 'a'; c <= 'z'; ++c) s.emplace_back(1, c);
  s.emplace_back("'");
  s.emplace_back("-");
  s.emplace_back(" ");
  return Alphabet(std::move(s), false);
}

namespace {

const std::vector<std::string>& accented_letters() {
  static const std::vector<std::string> letters{"à", "â", "ä", "ç", "é", "è", "ê", "ë", "î",
                                                "ï", "ô", "ö", "ù", "û", "ü", "ÿ", "œ", "æ"};
  return letters;
}

// Next UTF-8 code point; malformed bytes decode as U+FFFD.
char32_t next_code_point(std::string_view s, std::size_t& i) {
  const auto b0 = static_cast<unsigned char>(s[i++]);
  if (b0 < 0x80) return b0;
  int extra = 0;
  char32_t cp = 0;
  if ((b0 & 0xE0) == 0xC0) {
    extra = 1;
    cp = b0 & 0x1F;
  } else if ((b0 & 0xF0) == 0xE0) {
    extra = 2;
    cp = b0 & 0x0F;
  } else if ((b0 & 0xF8) == 0xF0) {
    extra = 3;
    cp = b0 & 0x07;
  } else {
    return 0xFFFD;
  }
  for (int k = 0; k < extra; ++k) {
    if (i >= s.size() || (static_cast<unsigned char>(s[i]) & 0xC0) != 0x80) return 0xFFFD;
    cp = (cp << 6) | (static_cast<unsigned char>(s[i++]) & 0x3F);
  }
  return cp;
}

void append_utf8(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

// ASCII spelling of a lowercase Latin-1 / Latin Extended-A letter, or empty
// when it has none.
std::string_view fold_accent(char32_t cp) {
  if (cp >= 0xE0 && cp <= 0xE5) return "a";
  if (cp == 0xE6) return "ae";
  if (cp == 0xE7) return "c";
  if (cp >= 0xE8 && cp <= 0xEB) return "e";
  if (cp >= 0xEC && cp <= 0xEF) return "i";
  if (cp == 0xF0) return "d";
  if (cp == 0xF1) return "n";
  if ((cp >= 0xF2 && cp <= 0xF6) || cp == 0xF8) return "o";
  if (cp >= 0xF9 && cp <= 0xFC) return "u";
  if (cp == 0xFD || cp == 0xFF) return "y";
  if (cp == 0xDF) return "ss";
  if (cp == 0x153) return "oe";
  return {};
}

char32_t to_lower(char32_t cp) {
  if (cp >= 'A' && cp <= 'Z') return cp + 32;
  if (cp >= 0xC0 && cp <= 0xDE && cp != 0xD7) return cp + 0x20;
  if (cp == 0x152) return 0x153;
  if (cp == 0x178) return 0xFF;
  return cp;
}

bool is_space(char32_t cp) { return cp == ' ' || cp == '\t' || cp == '\n' || cp == '\r' || cp == 0xA0; }

}  // namespace

std::string normalize_text(std::string_view text, bool keep_accents) {
  std::string out;
  bool pending_space = false;
  auto emit = [&](std::string_view piece) {
    if (pending_space && !out.empty()) out.push_back(' ');
    pending_space = false;
    out.append(piece);
  };
  for (std::size_t i = 0; i < text.size();) {
    char32_t cp = to_lower(next_code_point(text, i));
    if (is_space(cp)) {
      pending_space = true;
      continue;
    }
    if (cp == 0x2019) cp = '\'';
    if ((cp >= 'a' && cp <= 'z') || cp == '\'' || cp == '-') {
      const char c = static_cast<char>(cp);
      emit(std::string_view(&c, 1));
      continue;
    }
    if (keep_accents) {
      std::string encoded;
      append_utf8(encoded, cp);
      const auto& acc = accented_letters();
      if (std::find(acc.begin(), acc.end(), encoded) != acc.end()) {
        emit(encoded);
        continue;
      }
    }
    const auto folded = fold_accent(cp);
    if (!folded.empty()) emit(folded);
  }
  return out;
}

Alphabet Alphabet::accented() {
  auto base = folded();
  auto symbols = base.symbols_;
  for (const auto& l : accented_letters()) symbols.push_back(l);
  return Alphabet(std::move(symbols), true);
}

std::vector<int> Alphabet::encode(std::string_view normalized) const {
  std::vector<int> ids;
  for (std::size_t i = 0; i < normalized.size();) {
    const std::size_t start = i;
    next_code_point(normalized, i);
    const std::string_view piece = normalized.substr(start, i - start);
    const auto it = std::find(symbols_.begin() + 1, symbols_.end(), piece);
    if (it == symbols_.end()) {
      throw IndexError("alphabet has no symbol '" + std::string(piece) + "'");
    }
    ids.push_back(static_cast<int>(it - symbols_.begin()));
  }
  return ids;
}

std::string Alphabet::decode(std::span<const int> ids) const {
  std::string out;
  for (int id : ids) out += symbol(id);
  return out;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (char c : text) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      if (!cur.empty()) tokens.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

template <typename T>
CtcParams<T> init_ctc(std::size_t input_dim, std::size_t symbols, std::uint64_t seed) {
  if (input_dim < 1 || symbols < 2) {
    throw ConfigError("init_ctc: need input_dim >= 1 and at least blank plus one symbol");
  }
  Rng rng(seed);
  CtcParams<T> p;
  p.weight = Param<T>("W_ctc", uniform_init<T>(input_dim, symbols, input_dim, rng));
  p.bias = Param<T>("b_ctc", BasicMatrix<T>(1, symbols));
  return p;
}

template <typename T>
BasicMatrix<T> ctc_logits(const CtcParams<T>& p, const BasicMatrix<T>& frames) {
  return add_bias(matmul(frames, p.weight.value), p.bias.value);
}

template <typename T>
Var record_ctc_loss(Tape<T>& tape, CtcParams<T>& p, const BasicMatrix<T>& frames,
                    std::vector<int> target) {
  const Var logits = tape.add_bias(tape.matmul(tape.constant(frames), tape.leaf(p.weight)),
                                   tape.leaf(p.bias));
  return tape.ctc(logits, std::move(target));
}

template <typename T>
std::string ctc_greedy_decode(const BasicMatrix<T>& logprobs, const Alphabet& alphabet) {
  if (logprobs.cols() != alphabet.size()) {
    throw ShapeError("ctc_greedy_decode: " + std::to_string(logprobs.cols()) +
                     " columns for an alphabet of " + std::to_string(alphabet.size()));
  }
  const auto path = ctc_greedy_path(logprobs);
  return alphabet.decode(path);
}

template <typename T>
std::string transcribe(const CtcParams<T>& p, const Alphabet& alphabet, const BasicMatrix<T>& frames) {
  return ctc_greedy_decode(log_softmax_rows(ctc_logits(p, frames)), alphabet);
}

std::size_t edit_distance(std::span<const std::string> a, std::span<const std::string> b) {
  std::vector<std::size_t> prev(b.size() + 1);
  std::vector<std::size_t> cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double wer(std::span<const std::string> reference, std::span<const std::string> hypothesis) {
  if (reference.empty()) throw EmptyInputError("wer: reference is empty");
  return static_cast<double>(edit_distance(reference, hypothesis)) /
         static_cast<double>(reference.size());
}

PromptLabel asr_decide(std::string_view transcription, std::string_view target_word,
                       const AsrDecisionOptions& options) {
  const auto target = normalize_text(target_word, options.keep_accents);
  if (target.empty()) return PromptLabel::mispronounced();
  const auto text = normalize_text(transcription, options.keep_accents);
  bool hit = false;
  if (options.raw_substring) {
    hit = text.find(target) != std::string::npos;
  } else {
    // A multi-word target must appear as a contiguous token run.
    const auto words = tokenize(text);
    const auto want = tokenize(target);
    hit = std::search(words.begin(), words.end(), want.begin(), want.end()) != words.end();
  }
  return hit ? PromptLabel::word(std::string(target_word)) : PromptLabel::mispronounced();
}

#define NAMEGATE_INSTANTIATE_BASELINES(T)                                                    \
  template MlpParams<T> init_mlp<T>(std::size_t, std::size_t, std::size_t, std::uint64_t);   \
  template MlpTrace<T> mlp_forward_trace(MlpParams<T>&, const BasicMatrix<T>&, bool);        \
  template BasicMatrix<T> mlp_forward(MlpParams<T>&, const BasicMatrix<T>&, bool);           \
  template BasicMatrix<T> mlp_forward_eval(const MlpParams<T>&, const BasicMatrix<T>&);      \
  template Var record_mlp_loss(Tape<T>&, MlpParams<T>&, const BasicMatrix<T>&,               \
                               const std::vector<std::size_t>&, bool);                       \
  template PromptLabel classify(const MlpParams<T>&, const BasicMatrix<T>&, const LabelSpace&); \
  template CtcParams<T> init_ctc<T>(std::size_t, std::size_t, std::uint64_t);                \
  template BasicMatrix<T> ctc_logits(const CtcParams<T>&, const BasicMatrix<T>&);            \
  template Var record_ctc_loss(Tape<T>&, CtcParams<T>&, const BasicMatrix<T>&, std::vector<int>); \
  template std::string ctc_greedy_decode(const BasicMatrix<T>&, const Alphabet&);            \
  template std::string transcribe(const CtcParams<T>&, const Alphabet&, const BasicMatrix<T>&);

NAMEGATE_INSTANTIATE_BASELINES(float)
NAMEGATE_INSTANTIATE_BASELINES(double)

#undef NAMEGATE_INSTANTIATE_BASELINES

}  // namespace namegate
