#include "ktlab/seq/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "ktlab/error.hpp"

namespace ktlab::seq {

void GenSpec::validate() const {
  if (source_content < 1) throw InvalidArgument("gen spec: source_content must be >= 1");
  if (synonym_groups.empty()) throw InvalidArgument("gen spec: no synonym groups");
  if (emissions.size() != synonym_groups.size()) {
    throw InvalidArgument("gen spec: one emission distribution per synonym group required");
  }
  const int n_target = target_content();
  std::vector<int> seen(static_cast<std::size_t>(n_target), 0);
  for (std::size_t g = 0; g < synonym_groups.size(); ++g) {
    const auto& group = synonym_groups[g];
    if (group.empty()) throw InvalidArgument("gen spec: synonym group " + std::to_string(g) + " is empty");
    for (int t : group) {
      if (t < 0 || t >= n_target) throw InvalidArgument("gen spec: group member out of range");
      if (seen[static_cast<std::size_t>(t)]++) {
        throw InvalidArgument("gen spec: target token " + std::to_string(t) + " in two groups");
      }
    }
    if (emissions[g].size() != group.size()) {
      throw InvalidArgument("gen spec: emission " + std::to_string(g) + " size mismatch");
    }
    Categorical check(emissions[g]);  // throws unless a valid distribution
  }
  if (static_cast<int>(source_to_group.size()) != source_content) {
    throw InvalidArgument("gen spec: source_to_group must cover every source token");
  }
  for (int g : source_to_group) {
    if (g < 0 || g >= static_cast<int>(synonym_groups.size())) {
      throw InvalidArgument("gen spec: source_to_group entry out of range");
    }
  }
  if (min_length < 1 || max_length < min_length) {
    throw InvalidArgument("gen spec: need 1 <= min_length <= max_length");
  }
  if (!(noise >= 0.0 && noise < 1.0)) throw InvalidArgument("gen spec: noise must lie in [0,1)");
}

int GenSpec::target_content() const {
  std::size_t n = 0;
  for (const auto& g : synonym_groups) n += g.size();
  return static_cast<int>(n);
}

Vocab GenSpec::source_vocab() const {
  std::vector<std::string> toks;
  for (int i = 0; i < source_content; ++i) toks.push_back("s" + std::to_string(i));
  return Vocab(std::move(toks));
}

Vocab GenSpec::target_vocab() const {
  std::vector<std::string> toks;
  for (int i = 0; i < target_content(); ++i) toks.push_back("t" + std::to_string(i));
  return Vocab(std::move(toks));
}

void GeneratorParams::validate() const {
  if (source_tokens < 1 || groups < 1) throw InvalidArgument("generator: need >= 1 source token and group");
  if (min_group_size < 1 || max_group_size < min_group_size) {
    throw InvalidArgument("generator: need 1 <= min_group_size <= max_group_size");
  }
  if (!(emission_skew >= 0.0)) throw InvalidArgument("generator: emission_skew must be >= 0");
  if (min_length < 1 || max_length < min_length) {
    throw InvalidArgument("generator: need 1 <= min_length <= max_length");
  }
  if (!(noise >= 0.0 && noise < 1.0)) throw InvalidArgument("generator: noise must lie in [0,1)");
}

GenSpec make_gen_spec(const GeneratorParams& params) {
  params.validate();
  std::mt19937_64 rng(params.seed);
  std::uniform_int_distribution<int> size_dist(params.min_group_size, params.max_group_size);
  GenSpec spec;
  spec.source_content = params.source_tokens;
  int next = 0;
  for (int g = 0; g < params.groups; ++g) {
    const int size = size_dist(rng);
    std::vector<int> members;
    std::vector<double> weights;
    double total = 0.0;
    for (int r = 0; r < size; ++r) {
      members.push_back(next++);
      weights.push_back(1.0 / std::pow(r + 1.0, params.emission_skew));
      total += weights.back();
    }
    for (double& w : weights) w /= total;
    spec.synonym_groups.push_back(std::move(members));
    spec.emissions.push_back(std::move(weights));
  }
  for (int s = 0; s < params.source_tokens; ++s) spec.source_to_group.push_back(s % params.groups);
  spec.min_length = params.min_length;
  spec.max_length = params.max_length;
  spec.noise = params.noise;
  spec.seed = params.seed;
  spec.validate();
  return spec;
}

Corpus synth_corpus(const GenSpec& spec, std::size_t n_pairs) {
  spec.validate();
  if (n_pairs == 0) throw InvalidArgument("synth corpus: n_pairs must be >= 1");
  std::mt19937_64 rng(spec.seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_int_distribution<int> len_dist(spec.min_length, spec.max_length);
  std::uniform_int_distribution<int> src_dist(0, spec.source_content - 1);
  std::uniform_int_distribution<int> any_target(0, spec.target_content() - 1);
  std::bernoulli_distribution corrupt(spec.noise);
  std::vector<std::discrete_distribution<int>> emit;
  for (const auto& e : spec.emissions) emit.emplace_back(e.begin(), e.end());

  std::vector<SentencePair> pairs;
  pairs.reserve(n_pairs);
  for (std::size_t n = 0; n < n_pairs; ++n) {
    SentencePair pair;
    const int len = len_dist(rng);
    for (int t = 0; t < len; ++t) {
      const int s = src_dist(rng);
      pair.source.push_back(Vocab::kFirstContent + s);
      const auto g = static_cast<std::size_t>(spec.source_to_group[static_cast<std::size_t>(s)]);
      int content = spec.synonym_groups[g][static_cast<std::size_t>(emit[g](rng))];
      if (spec.noise > 0.0 && corrupt(rng)) content = any_target(rng);
      pair.target.push_back(Vocab::kFirstContent + content);
    }
    pair.target.push_back(Vocab::kEos);
    pairs.push_back(std::move(pair));
  }

  const std::size_t n_valid = n_pairs / 10;
  const std::size_t n_test = n_pairs / 10;
  const std::size_t n_train = n_pairs - n_valid - n_test;
  Corpus c{spec.source_vocab(), spec.target_vocab(), {}, {}, {}};
  auto begin = pairs.begin();
  c.train.assign(begin, begin + static_cast<std::ptrdiff_t>(n_train));
  c.valid.assign(begin + static_cast<std::ptrdiff_t>(n_train),
                 begin + static_cast<std::ptrdiff_t>(n_train + n_valid));
  c.test.assign(begin + static_cast<std::ptrdiff_t>(n_train + n_valid), pairs.end());
  return c;
}

OracleTeacher::OracleTeacher(GenSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  vocab_size_ = Vocab::kFirstContent + spec_.target_content();
}

std::vector<double> OracleTeacher::content_dist(TokenId source_token) const {
  const int s = source_token - Vocab::kFirstContent;
  if (s < 0 || s >= spec_.source_content) {
    throw InvalidArgument("oracle: source token " + std::to_string(source_token) + " invalid");
  }
  const int n = spec_.target_content();
  std::vector<double> d(static_cast<std::size_t>(n), spec_.noise / n);
  const auto g = static_cast<std::size_t>(spec_.source_to_group[static_cast<std::size_t>(s)]);
  for (std::size_t r = 0; r < spec_.synonym_groups[g].size(); ++r) {
    d[static_cast<std::size_t>(spec_.synonym_groups[g][r])] += (1.0 - spec_.noise) * spec_.emissions[g][r];
  }
  return d;
}

Categorical OracleTeacher::next_token(std::span<const TokenId> source,
                                      std::span<const TokenId> prefix) const {
  if (source.empty()) throw InvalidArgument("oracle: empty source");
  const std::size_t t = prefix.size();
  if (t > source.size()) {
    throw InvalidArgument("oracle: prefix of length " + std::to_string(t) +
                          " runs past EOS for a source of length " + std::to_string(source.size()));
  }
  for (std::size_t i = 0; i < t; ++i) {
    const TokenId y = prefix[i];
    const int c = y - Vocab::kFirstContent;
    if (c < 0 || c >= spec_.target_content()) {
      throw InvalidArgument("oracle: prefix token " + std::to_string(y) + " at position " +
                            std::to_string(i) + " cannot occur before EOS");
    }
    if (content_dist(source[i])[static_cast<std::size_t>(c)] <= 0.0) {
      throw InvalidArgument("oracle: prefix token " + std::to_string(y) + " at position " +
                            std::to_string(i) + " has zero probability under the process");
    }
  }
  std::vector<double> q(static_cast<std::size_t>(vocab_size_), 0.0);
  if (t == source.size()) {
    q[Vocab::kEos] = 1.0;
  } else {
    const auto d = content_dist(source[t]);
    std::copy(d.begin(), d.end(), q.begin() + Vocab::kFirstContent);
  }
  return Categorical(std::move(q));
}

std::vector<Categorical> OracleTeacher::position_dists(std::span<const TokenId> source,
                                                       std::span<const TokenId> target) const {
  std::vector<Categorical> out;
  out.reserve(target.size());
  for (std::size_t t = 0; t < target.size(); ++t) out.push_back(next_token(source, target.first(t)));
  return out;
}

std::string corpus_to_tsv(std::span<const SentencePair> pairs, const Vocab& source_vocab,
                          const Vocab& target_vocab) {
  std::ostringstream out;
  for (const auto& p : pairs) {
    out << source_vocab.decode(p.source) << '\t' << target_vocab.decode(p.target) << '\n';
  }
  return out.str();
}

std::vector<SentencePair> corpus_from_tsv(const std::string& text, const Vocab& source_vocab,
                                          const Vocab& target_vocab) {
  std::vector<SentencePair> pairs;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw InvalidArgument("corpus line " + std::to_string(line_no) + ": missing tab");
    }
    SentencePair p;
    p.source = source_vocab.encode(line.substr(0, tab));
    p.target = target_vocab.encode(line.substr(tab + 1));
    p.target.push_back(Vocab::kEos);
    p.validate(source_vocab.size(), target_vocab.size());
    pairs.push_back(std::move(p));
  }
  return pairs;
}

std::string vocab_to_text(const Vocab& vocab) {
  std::string out;
  for (int i = Vocab::kFirstContent; i < vocab.size(); ++i) out += vocab.token(i) + "\n";
  return out;
}

Vocab vocab_from_text(const std::string& text) {
  std::vector<std::string> toks;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) toks.push_back(line);
  }
  return Vocab(std::move(toks));
}

}  // namespace ktlab::seq
