#include "tdc/seqcore.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include "tdc/csv.hpp"
#include "tdc/error.hpp"
#include "tdc/rng.hpp"

namespace tdc {

namespace {

bool is_separator(char c) {
  return c == ',' || std::isspace(static_cast<unsigned char>(c));
}

}  // namespace

Alphabet::Alphabet(const std::vector<std::string>& tokens) {
  for (const auto& t : tokens) intern(t);
}

bool Alphabet::valid_token(std::string_view token) {
  return !token.empty() && std::none_of(token.begin(), token.end(), is_separator);
}

StateId Alphabet::intern(std::string_view token) {
  if (!valid_token(token)) {
    throw Error(ErrorKind::InvalidArgument, "invalid state token '" + std::string(token) + "'");
  }
  auto it = index_.find(std::string(token));
  if (it != index_.end()) return it->second;
  if (names_.size() >= 0xFFFF) throw Error(ErrorKind::InvalidArgument, "alphabet too large");
  auto id = static_cast<StateId>(names_.size());
  names_.emplace_back(token);
  index_.emplace(names_.back(), id);
  return id;
}

std::optional<StateId> Alphabet::find(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t SequenceSet::max_length() const {
  std::size_t m = 0;
  for (const auto& s : sequences) m = std::max(m, s.size());
  return m;
}

std::vector<std::string> SequenceSet::names_of(SequenceView seq) const {
  std::vector<std::string> out;
  out.reserve(seq.size());
  for (StateId id : seq) out.push_back(alphabet.name(id));
  return out;
}

SequenceSet parse_sequence_file(std::string_view text, std::string name, std::size_t max_length) {
  SequenceSet set;
  set.name = std::move(name);
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    ++line_no;
    pos = end + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);

    bool blank = std::all_of(line.begin(), line.end(),
                             [](char c) { return std::isspace(static_cast<unsigned char>(c)); });
    if (blank) {
      if (end == text.size()) break;
      continue;
    }

    // Whitespace runs act as one separator; a comma may be surrounded by
    // whitespace, but two commas (or a leading/trailing comma) leave an empty
    // token.
    Sequence seq;
    std::size_t i = 0;
    auto skip_ws = [&] {
      while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    };
    auto malformed = [&](const std::string& why) {
      return Error(ErrorKind::MalformedLine, "line " + std::to_string(line_no) + ": " + why);
    };
    skip_ws();
    for (;;) {
      std::size_t start = i;
      while (i < line.size() && !is_separator(line[i])) ++i;
      if (i == start) throw malformed("empty token");
      seq.push_back(set.alphabet.intern(line.substr(start, i - start)));
      skip_ws();
      if (i >= line.size()) break;
      if (line[i] == ',') {
        ++i;
        skip_ws();
        if (i >= line.size()) throw malformed("empty token");
      }
    }
    if (seq.size() > max_length) {
      throw malformed("sequence has " + std::to_string(seq.size()) + " states, limit is " +
                      std::to_string(max_length));
    }
    set.sequences.push_back(std::move(seq));
    if (end == text.size()) break;
  }
  if (set.sequences.empty()) throw Error(ErrorKind::EmptyFile, "no sequences in input");
  return set;
}

std::string format_sequence_file(const SequenceSet& set) {
  std::string out;
  for (const auto& seq : set.sequences) {
    for (std::size_t i = 0; i < seq.size(); ++i) {
      if (i) out += ',';
      out += set.alphabet.name(seq[i]);
    }
    out += '\n';
  }
  return out;
}

const std::vector<std::string>& descriptor_length_columns() {
  static const std::vector<std::string> cols = {"min_len",        "max_len",      "median_len",
                                                "stdev_len",      "outlier_count", "unique_count"};
  return cols;
}

std::vector<double> descriptor_length_values(const SetDescriptor& d) {
  return {static_cast<double>(d.min_len),       static_cast<double>(d.max_len), d.median_len,
          d.stdev_len, static_cast<double>(d.outlier_count), static_cast<double>(d.unique_count)};
}

std::string ngram_column(const std::string& key) { return "ng:" + key; }

double quantile_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw Error(ErrorKind::InvalidArgument, "quantile of empty range");
  double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= sorted.size()) return sorted.back();
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[lo + 1] - sorted[lo]);
}

SetDescriptor compute_descriptor(const SequenceSet& set) {
  if (set.sequences.empty()) throw Error(ErrorKind::InvalidArgument, "empty sequence set");
  SetDescriptor d;

  std::vector<double> lengths;
  lengths.reserve(set.size());
  for (const auto& s : set.sequences) lengths.push_back(static_cast<double>(s.size()));
  std::sort(lengths.begin(), lengths.end());
  const double n = static_cast<double>(lengths.size());

  d.min_len = static_cast<int>(lengths.front());
  d.max_len = static_cast<int>(lengths.back());
  d.median_len = quantile_sorted(lengths, 0.5);
  double mean = std::accumulate(lengths.begin(), lengths.end(), 0.0) / n;
  double ss = 0;
  for (double l : lengths) ss += (l - mean) * (l - mean);
  d.stdev_len = std::sqrt(ss / n);

  double q1 = quantile_sorted(lengths, 0.25);
  double q3 = quantile_sorted(lengths, 0.75);
  double iqr = q3 - q1;
  double lo = q1 - 1.5 * iqr, hi = q3 + 1.5 * iqr;
  d.outlier_count = static_cast<int>(
      std::count_if(lengths.begin(), lengths.end(), [&](double l) { return l < lo || l > hi; }));

  // Distinct sequences are compared by token names so the result does not
  // depend on id assignment order.
  std::set<std::vector<std::string>> distinct;
  std::map<std::string, double> uni, bi;
  double n_uni = 0, n_bi = 0;
  for (const auto& s : set.sequences) {
    distinct.insert(set.names_of(s));
    for (std::size_t i = 0; i < s.size(); ++i) {
      uni[set.alphabet.name(s[i])] += 1;
      n_uni += 1;
      if (i + 1 < s.size()) {
        bi[set.alphabet.name(s[i]) + " " + set.alphabet.name(s[i + 1])] += 1;
        n_bi += 1;
      }
    }
  }
  d.unique_count = static_cast<int>(distinct.size());
  for (auto& [k, c] : uni) d.ngram_freqs[k] = c / n_uni;
  for (auto& [k, c] : bi) d.ngram_freqs[k] = c / n_bi;
  return d;
}

std::pair<std::string, std::string> descriptor_csv(const SetDescriptor& d) {
  std::string header, values;
  const auto& cols = descriptor_length_columns();
  auto vals = descriptor_length_values(d);
  for (std::size_t i = 0; i < cols.size(); ++i) {
    if (i) {
      header += ',';
      values += ',';
    }
    header += cols[i];
    values += csv::format_double(vals[i]);
  }
  for (const auto& [key, f] : d.ngram_freqs) {
    header += ',' + ngram_column(key);
    values += ',' + csv::format_double(f);
  }
  return {header, values};
}

SequenceSet generate_set(const GeneratorConfig& cfg) {
  if (cfg.templates.empty()) throw Error(ErrorKind::InvalidArgument, "generator needs templates");
  if (!(cfg.mutation_probability >= 0.0 && cfg.mutation_probability <= 1.0)) {
    throw Error(ErrorKind::InvalidArgument, "mutation probability must be in [0,1]");
  }
  if (cfg.set_size == 0) throw Error(ErrorKind::InvalidArgument, "set size must be >= 1");

  SequenceSet set;
  set.name = cfg.name;
  std::vector<Sequence> templates;
  for (const auto& t : cfg.templates) {
    if (t.empty()) throw Error(ErrorKind::InvalidArgument, "empty template");
    Sequence s;
    for (const auto& tok : t) s.push_back(set.alphabet.intern(tok));
    templates.push_back(std::move(s));
  }
  for (const auto& tok : cfg.extra_states) set.alphabet.intern(tok);
  const std::size_t k = set.alphabet.size();

  Rng rng(cfg.seed);
  auto random_state = [&] { return static_cast<StateId>(uniform_index(rng, k)); };
  auto other_state = [&](StateId s) {
    if (k == 1) return s;
    auto r = static_cast<StateId>(uniform_index(rng, k - 1));
    return r >= s ? static_cast<StateId>(r + 1) : r;
  };

  set.sequences.reserve(cfg.set_size);
  for (std::size_t n = 0; n < cfg.set_size; ++n) {
    int failures = 0;
    for (;;) {
      const Sequence& tpl = templates[uniform_index(rng, templates.size())];
      Sequence out;
      out.reserve(tpl.size() + 4);
      for (StateId s : tpl) {
        if (uniform_real(rng) >= cfg.mutation_probability) {
          out.push_back(s);
          continue;
        }
        switch (uniform_index(rng, 3)) {
          case 0: out.push_back(other_state(s)); break;
          case 1: break;
          default:
            out.push_back(s);
            out.push_back(random_state());
        }
      }
      if (!out.empty()) {
        set.sequences.push_back(std::move(out));
        break;
      }
      if (++failures >= 100) {
        throw Error(ErrorKind::DegenerateResult, "100 consecutive empty sequences generated");
      }
    }
  }
  return set;
}

SequenceSet generate_random_set(const RandomSetConfig& cfg) {
  if (cfg.alphabet.empty() || cfg.min_length == 0 || cfg.max_length < cfg.min_length ||
      cfg.set_size == 0) {
    throw Error(ErrorKind::InvalidArgument, "invalid random set configuration");
  }
  SequenceSet set;
  set.name = cfg.name;
  for (const auto& tok : cfg.alphabet) set.alphabet.intern(tok);
  Rng rng(cfg.seed);
  for (std::size_t n = 0; n < cfg.set_size; ++n) {
    auto len = static_cast<std::size_t>(
        uniform_int(rng, static_cast<int>(cfg.min_length), static_cast<int>(cfg.max_length)));
    Sequence s(len);
    for (auto& x : s) x = static_cast<StateId>(uniform_index(rng, set.alphabet.size()));
    set.sequences.push_back(std::move(s));
  }
  return set;
}

}  // namespace tdc
