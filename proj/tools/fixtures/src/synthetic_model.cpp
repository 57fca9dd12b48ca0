#include "vizpipe/fixtures/synthetic_model.hpp"

#include <algorithm>
#include <cctype>
#include <random>
#include <set>

#include <fmt/format.h>

#include "vizpipe/error.hpp"
#include "vizpipe/text.hpp"

namespace vizpipe::fixtures {

namespace fs = std::filesystem;
using summary::AtomicType;
using summary::DatasetSummary;
using summary::FieldProfile;

namespace {

// Everyday phrasings the model maps onto field names.
const std::vector<std::pair<std::string, std::string>> kSynonyms = {
    {"fuel efficiency", "mpg"}, {"miles per gallon", "mpg"}, {"country", "origin"},
    {"horsepower", "hp"},       {"life expectancy", "life_expect"}, {"population", "pop"},
    {"stock price", "price"},   {"rain", "precipitation"},
};

bool ident(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

// Position of the first whole-token occurrence of `needle` in `hay`.
std::optional<std::size_t> token_pos(const std::string& hay, const std::string& needle) {
  std::size_t pos = 0;
  while ((pos = hay.find(needle, pos)) != std::string::npos) {
    const auto end = pos + needle.size();
    if ((pos == 0 || !ident(hay[pos - 1])) && (end >= hay.size() || !ident(hay[end]))) return pos;
    ++pos;
  }
  return std::nullopt;
}

bool is_numeric(const FieldProfile& f) {
  return f.atomic_type == AtomicType::Integer || f.atomic_type == AtomicType::Float;
}

bool is_temporal(const FieldProfile& f) {
  return f.atomic_type == AtomicType::Date || (f.atomic_type == AtomicType::Integer && text::to_lower(f.name) == "year");
}

bool is_categorical(const FieldProfile& f) {
  if (f.atomic_type == AtomicType::String || f.atomic_type == AtomicType::Boolean) return f.stats.n_unique <= 20;
  return f.atomic_type == AtomicType::Integer && !is_temporal(f) && f.stats.n_unique <= 8;
}

bool is_measure(const FieldProfile& f) { return is_numeric(f) && !is_temporal(f) && f.stats.n_unique > 8; }

// Fields mentioned in `text`, by first position.
std::vector<const FieldProfile*> mentioned_fields(const std::string& text, const DatasetSummary& s) {
  const auto lower = text::to_lower(text);
  std::vector<std::pair<std::size_t, const FieldProfile*>> hits;
  for (const auto& f : s.fields) {
    auto pos = token_pos(lower, text::to_lower(f.name));
    for (const auto& [phrase, field] : kSynonyms) {
      if (field != f.name || s.find(phrase)) continue;
      if (auto p = token_pos(lower, phrase); p && (!pos || *p < *pos)) pos = p;
    }
    if (pos) hits.emplace_back(*pos, &f);
  }
  std::stable_sort(hits.begin(), hits.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<const FieldProfile*> out;
  for (const auto& h : hits) out.push_back(h.second);
  return out;
}

const FieldProfile* first_where(const std::vector<const FieldProfile*>& fields,
                                const std::function<bool(const FieldProfile&)>& pred, const FieldProfile* skip = nullptr) {
  for (const auto* f : fields)
    if (f != skip && pred(*f)) return f;
  return nullptr;
}

std::string section(const std::string& text, const std::string& begin, const std::string& end) {
  const auto b = text.find(begin);
  if (b == std::string::npos) return "";
  const auto start = b + begin.size();
  const auto e = text.find(end, start);
  return text.substr(start, e == std::string::npos ? std::string::npos : e - start);
}

std::string line_after(const std::string& text, const std::string& label) {
  const auto b = text.find("\n" + label);
  if (b == std::string::npos) return "";
  const auto start = b + 1 + label.size();
  return text.substr(start, text.find('\n', start) - start);
}

const std::string& last_user(const llm::PromptRequest& r) {
  static const std::string empty;
  for (auto it = r.messages.rbegin(); it != r.messages.rend(); ++it)
    if (it->role == "user") return it->text;
  return empty;
}

std::string q(const std::string& s) { return nlohmann::json(s).dump(); }

std::string fence(const std::string& grammar, const std::string& code) {
  return fmt::format("```{}\n{}\n```", grammar == "vegalite" ? "json" : "python", code);
}

std::string wrong_name(const std::string& field) {
  std::string out = field;
  out[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(out[0])));
  if (out == field) out += "_value";
  return out;
}

std::string default_title(const ChartPlan& p) {
  switch (p.kind) {
    case ChartKind::Bar: return fmt::format("Mean {} by {}", p.y, p.x);
    case ChartKind::Count: return fmt::format("Number of records by {}", p.x);
    case ChartKind::Pie: return fmt::format("Share of records by {}", p.x);
    case ChartKind::Scatter: return fmt::format("{} vs {}", p.y, p.x);
    case ChartKind::Line: return fmt::format("{} over {}", p.y, p.x);
    case ChartKind::Histogram: return fmt::format("Distribution of {}", p.x);
  }
  return "";
}

// ---- Vega-Lite -------------------------------------------------------------

nlohmann::ordered_json vegalite_object(const ChartPlan& p) {
  using oj = nlohmann::ordered_json;
  oj spec;
  oj enc;
  auto x_type = p.x_temporal ? "temporal" : (p.x_quantitative ? "quantitative" : "nominal");
  switch (p.kind) {
    case ChartKind::Bar:
      spec["mark"] = "bar";
      enc["x"] = {{"field", p.x}, {"type", "nominal"}, {"sort", "-y"}};
      enc["y"] = {{"field", p.y}, {"type", "quantitative"}, {"aggregate", "mean"}, {"title", "mean " + p.y}};
      break;
    case ChartKind::Count:
      spec["mark"] = "bar";
      enc["x"] = {{"field", p.x}, {"type", "nominal"}, {"sort", "-y"}};
      enc["y"] = {{"aggregate", "count"}, {"type", "quantitative"}, {"title", "count"}};
      break;
    case ChartKind::Pie:
      spec["mark"] = "arc";
      enc["theta"] = {{"aggregate", "count"}, {"type", "quantitative"}};
      enc["color"] = {{"field", p.x}, {"type", "nominal"}};
      break;
    case ChartKind::Scatter:
      spec["mark"] = "point";
      enc["x"] = {{"field", p.x}, {"type", "quantitative"}};
      enc["y"] = {{"field", p.y}, {"type", "quantitative"}};
      break;
    case ChartKind::Line:
      spec["mark"] = "line";
      enc["x"] = {{"field", p.x}, {"type", x_type}};
      enc["y"] = {{"field", p.y}, {"type", "quantitative"}, {"aggregate", "mean"}};
      break;
    case ChartKind::Histogram:
      spec["mark"] = "bar";
      enc["x"] = {{"field", p.x}, {"type", "quantitative"}, {"bin", true}};
      enc["y"] = {{"aggregate", "count"}, {"type", "quantitative"}};
      break;
  }
  if (p.color && p.kind != ChartKind::Pie) enc["color"] = {{"field", *p.color}, {"type", "nominal"}};
  spec["encoding"] = enc;
  spec["title"] = p.title;
  return spec;
}

std::string vegalite_members(const nlohmann::ordered_json& spec, bool compact) {
  std::vector<std::string> members;
  for (const auto& [key, value] : spec.items()) {
    if (compact) {
      members.push_back(q(key) + ":" + value.dump());
      continue;
    }
    auto body = value.dump(2);
    std::string indented;
    for (char c : body) {
      indented += c;
      if (c == '\n') indented += "  ";
    }
    members.push_back("  " + q(key) + ": " + indented);
  }
  return text::join(members, compact ? "," : ",\n");
}

// ---- Python ----------------------------------------------------------------

std::string python_stub(const ChartPlan& p, bool seaborn, Fault fault) {
  const auto field = [&](const std::string& f) { return q(fault == Fault::UnknownField ? wrong_name(f) : f); };
  const std::string fig = p.kind == ChartKind::Pie ? "    fig, ax = plt.subplots(figsize=(6, 6))"
                                                   : "    fig, ax = plt.subplots(figsize=(8, 5))";
  std::vector<std::string> lines;
  lines.push_back(fault == Fault::Syntax ? fig.substr(0, fig.size() - 1) : fig);
  const auto X = q(p.x);
  switch (p.kind) {
    case ChartKind::Bar:
      if (seaborn) {
        lines.push_back(fmt::format("    sns.barplot(data=data, x={}, y={}, errorbar=None, ax=ax)", X, field(p.y)));
      } else {
        lines.push_back(fmt::format("    grouped = data.groupby({})[{}].mean().sort_values(ascending=False)", X, field(p.y)));
        lines.push_back("    ax.bar(grouped.index.astype(str), grouped.values)");
      }
      lines.push_back(fmt::format("    ax.set_xlabel({})", X));
      lines.push_back(fmt::format("    ax.set_ylabel({})", q("mean " + p.y)));
      break;
    case ChartKind::Count:
      if (seaborn) {
        lines.push_back(fmt::format("    sns.countplot(data=data, x={}, ax=ax)", field(p.x)));
      } else {
        lines.push_back(fmt::format("    counts = data[{}].value_counts()", field(p.x)));
        lines.push_back("    ax.bar(counts.index.astype(str), counts.values)");
      }
      lines.push_back(fmt::format("    ax.set_xlabel({})", X));
      lines.push_back("    ax.set_ylabel(\"count\")");
      break;
    case ChartKind::Pie:
      lines.push_back(fmt::format("    counts = data[{}].value_counts()", field(p.x)));
      lines.push_back("    ax.pie(counts.values, labels=counts.index.astype(str), autopct=\"%1.0f%%\")");
      break;
    case ChartKind::Scatter:
      if (seaborn) {
        lines.push_back(fmt::format("    sns.scatterplot(data=data, x={}, y={}{}, ax=ax)", X, field(p.y),
                                    p.color ? ", hue=" + q(*p.color) : ""));
      } else if (p.color) {
        lines.push_back(fmt::format("    for name, group in data.groupby({}):", q(*p.color)));
        lines.push_back(fmt::format("        ax.scatter(group[{}], group[{}], label=str(name), alpha=0.7)", X, field(p.y)));
        lines.push_back(fmt::format("    ax.legend(title={})", q(*p.color)));
      } else {
        lines.push_back(fmt::format("    ax.scatter(data[{}], data[{}], alpha=0.7)", X, field(p.y)));
      }
      lines.push_back(fmt::format("    ax.set_xlabel({})", X));
      lines.push_back(fmt::format("    ax.set_ylabel({})", q(p.y)));
      break;
    case ChartKind::Line:
      lines.push_back("    frame = data.copy()");
      if (p.x_temporal && p.x != "year") lines.push_back(fmt::format("    frame[{0}] = pd.to_datetime(frame[{0}])", X));
      if (seaborn) {
        lines.push_back(fmt::format("    sns.lineplot(data=frame, x={}, y={}{}, errorbar=None, ax=ax)", X, field(p.y),
                                    p.color ? ", hue=" + q(*p.color) : ""));
      } else if (p.color) {
        lines.push_back(fmt::format("    for name, group in frame.groupby({}):", q(*p.color)));
        lines.push_back(fmt::format("        series = group.groupby({})[{}].mean()", X, field(p.y)));
        lines.push_back("        ax.plot(series.index, series.values, label=str(name))");
        lines.push_back(fmt::format("    ax.legend(title={})", q(*p.color)));
      } else {
        lines.push_back(fmt::format("    series = frame.groupby({})[{}].mean()", X, field(p.y)));
        lines.push_back("    ax.plot(series.index, series.values)");
      }
      lines.push_back(fmt::format("    ax.set_xlabel({})", X));
      lines.push_back(fmt::format("    ax.set_ylabel({})", q(p.y)));
      break;
    case ChartKind::Histogram:
      if (seaborn)
        lines.push_back(fmt::format("    sns.histplot(data=data, x={}, bins=15, ax=ax)", field(p.x)));
      else
        lines.push_back(fmt::format("    ax.hist(data[{}].dropna(), bins=15)", field(p.x)));
      lines.push_back(fmt::format("    ax.set_xlabel({})", X));
      lines.push_back("    ax.set_ylabel(\"count\")");
      break;
  }
  lines.push_back(fmt::format("    ax.set_title({})", q(p.title)));
  lines.push_back("    return plt");
  return text::join(lines, "\n");
}

// Inserts `extra` lines before the final `return plt`.
std::string python_insert(const std::string& stub, const std::vector<std::string>& extra) {
  auto lines = text::split_lines(stub);
  auto it = std::find_if(lines.rbegin(), lines.rend(), [](const std::string& l) { return text::trim(l) == "return plt"; });
  auto at = it == lines.rend() ? lines.end() : std::prev(it.base());
  lines.insert(at, extra.begin(), extra.end());
  return text::join(lines, "\n");
}

std::optional<std::string> quoted(const std::string& s) {
  for (char open : {'"', '\''}) {
    const auto b = s.find(open);
    if (b == std::string::npos) continue;
    const auto e = s.find(open, b + 1);
    if (e != std::string::npos) return s.substr(b + 1, e - b - 1);
  }
  return std::nullopt;
}

const std::vector<std::string> kColorWords = {"red", "orange", "green", "teal", "purple", "gray", "grey", "black", "blue"};

std::optional<std::string> color_word(const std::string& lower) {
  for (const auto& c : kColorWords)
    if (token_pos(lower, c)) return c;
  return std::nullopt;
}

bool is_pie_code(const std::string& code) {
  return code.find("\"arc\"") != std::string::npos || code.find("ax.pie(") != std::string::npos;
}

bool looks_broken(const std::string& code) {
  int depth = 0;
  bool in_str = false;
  char quote = 0;
  for (std::size_t i = 0; i < code.size(); ++i) {
    const char c = code[i];
    if (in_str) {
      if (c == '\\') ++i;
      else if (c == quote) in_str = false;
      continue;
    }
    if (c == '"' || c == '\'') {
      in_str = true;
      quote = c;
    } else if (c == '(' || c == '[' || c == '{') {
      ++depth;
    } else if (c == ')' || c == ']' || c == '}') {
      if (--depth < 0) return true;
    }
  }
  return depth != 0 || in_str;
}

}  // namespace

std::string to_string(ChartKind k) {
  switch (k) {
    case ChartKind::Bar: return "bar";
    case ChartKind::Count: return "count";
    case ChartKind::Pie: return "pie";
    case ChartKind::Scatter: return "scatter";
    case ChartKind::Line: return "line";
    case ChartKind::Histogram: return "histogram";
  }
  return "bar";
}

ChartPlan plan_chart(const std::string& question, const std::string& visualization, const DatasetSummary& s) {
  const auto mentioned = mentioned_fields(visualization + " \n " + question, s);
  if (mentioned.empty()) raise(ErrorCode::PreconditionViolation, "goal names no field of " + s.name);
  const auto lower = text::to_lower(visualization + " " + question);
  auto has = [&](const char* w) { return lower.find(w) != std::string::npos; };

  ChartPlan p;
  if (has("pie")) p.kind = ChartKind::Pie;
  else if (has("scatter") || has(" vs ") || has("relate")) p.kind = ChartKind::Scatter;
  else if (has("line") || has("over time") || has("trend") || has("change over")) p.kind = ChartKind::Line;
  else if (has("histogram") || has("distribution")) p.kind = ChartKind::Histogram;
  else if (has("count") || has("how many") || has("number of")) p.kind = ChartKind::Count;

  const auto* cat = first_where(mentioned, is_categorical);
  const auto* num = first_where(mentioned, [](const FieldProfile& f) { return is_numeric(f) && !is_temporal(f); });
  if (p.kind == ChartKind::Bar && !cat) p.kind = num ? ChartKind::Histogram : ChartKind::Count;
  if (p.kind == ChartKind::Bar && !num) p.kind = ChartKind::Count;

  switch (p.kind) {
    case ChartKind::Pie:
    case ChartKind::Count:
      p.x = (cat ? cat : mentioned.front())->name;
      break;
    case ChartKind::Histogram:
      p.x = (num ? num : mentioned.front())->name;
      p.x_quantitative = true;
      break;
    case ChartKind::Bar:
      p.x = cat->name;
      p.y = num->name;
      break;
    case ChartKind::Scatter: {
      const auto* a = num;
      const auto* b = a ? first_where(mentioned, [](const FieldProfile& f) { return is_numeric(f); }, a) : nullptr;
      if (!a || !b) {
        p.kind = ChartKind::Histogram;
        p.x = (a ? a : mentioned.front())->name;
        p.x_quantitative = true;
        break;
      }
      p.x = a->name;
      p.y = b->name;
      if (cat) p.color = cat->name;
      break;
    }
    case ChartKind::Line: {
      const FieldProfile* t = first_where(mentioned, is_temporal);
      if (!t)
        for (const auto& f : s.fields)
          if (is_temporal(f)) t = &f;
      const auto* y = first_where(mentioned, [](const FieldProfile& f) { return is_numeric(f) && !is_temporal(f); });
      if (!t || !y) {
        p.kind = ChartKind::Histogram;
        p.x = (y ? y : mentioned.front())->name;
        p.x_quantitative = true;
        break;
      }
      p.x = t->name;
      p.x_temporal = t->atomic_type == AtomicType::Date;
      p.x_quantitative = !p.x_temporal;
      p.y = y->name;
      if (cat && cat->name != p.x) p.color = cat->name;
      break;
    }
  }
  p.title = default_title(p);
  return p;
}

std::vector<goals::Goal> propose_goals(const DatasetSummary& s, int n) {
  std::vector<const FieldProfile*> cats, measures, times;
  for (const auto& f : s.fields) {
    if (is_temporal(f)) times.push_back(&f);
    else if (is_categorical(f)) cats.push_back(&f);
    else if (is_measure(f)) measures.push_back(&f);
  }
  std::vector<goals::Goal> out;
  auto add = [&](std::string question, std::string vis, std::string why) {
    if (static_cast<int>(out.size()) >= n) return;
    for (const auto& g : out)
      if (g.visualization == vis) return;
    out.push_back({static_cast<int>(out.size()), std::move(question), std::move(vis), std::move(why)});
  };
  auto bt = [](const FieldProfile* f) { return "`" + f->name + "`"; };
  const auto m = [&](std::size_t i) { return measures[i % measures.size()]; };
  const auto c = [&](std::size_t i) { return cats[i % cats.size()]; };

  for (std::size_t round = 0; round < 3 && static_cast<int>(out.size()) < n; ++round) {
    if (!cats.empty() && !measures.empty())
      add(fmt::format("What is the average {} for each {}?", bt(m(round)), bt(c(round))),
          fmt::format("bar chart of mean {} by {}", bt(m(round)), bt(c(round))),
          fmt::format("Comparing mean {} across {} groups shows which groups stand out.", bt(m(round)), bt(c(round))));
    if (measures.size() >= 2)
      add(fmt::format("How does {} relate to {}?", bt(m(round + 1)), bt(m(round))),
          fmt::format("scatter plot of {} vs {}", bt(m(round)), bt(m(round + 1))),
          fmt::format("A scatter plot of {} against {} reveals correlation and outliers.", bt(m(round + 1)), bt(m(round))));
    if (!times.empty() && !measures.empty())
      add(fmt::format("How does {} change over {}?", bt(m(round)), bt(times[0])),
          fmt::format("line chart of mean {} over {}", bt(m(round)), bt(times[0])),
          fmt::format("Tracking {} across {} exposes trends and seasonality.", bt(m(round)), bt(times[0])));
    if (!measures.empty())
      add(fmt::format("What is the distribution of {}?", bt(m(round + 1))),
          fmt::format("histogram of {}", bt(m(round + 1))),
          fmt::format("Binning {} shows its spread, skew and typical values.", bt(m(round + 1))));
    if (!cats.empty())
      add(fmt::format("What share of the records falls in each {}?", bt(c(round + 1))),
          fmt::format("pie chart of the share of records by {}", bt(c(round + 1))),
          fmt::format("The share of records per {} shows how balanced the data is.", bt(c(round + 1))));
    if (!cats.empty())
      add(fmt::format("How many records are there for each {}?", bt(c(round))),
          fmt::format("bar chart of the number of records by {}", bt(c(round))),
          fmt::format("Counting records per {} shows where the data is concentrated.", bt(c(round))));
  }
  return out;
}

std::string render_stub(const ChartPlan& plan, const std::string& grammar_id, Fault fault) {
  if (grammar_id == "vegalite") {
    auto p = plan;
    if (fault == Fault::UnknownField) {
      if (!p.y.empty()) p.y = wrong_name(p.y);
      else p.x = wrong_name(p.x);
    }
    auto members = vegalite_members(vegalite_object(p), false);
    if (fault == Fault::Syntax) {
      const auto at = members.find("\n  }");
      if (at != std::string::npos) members.erase(at, 4);
    }
    return members;
  }
  if (grammar_id == "matplotlib" || grammar_id == "seaborn") return python_stub(plan, grammar_id == "seaborn", fault);
  raise(ErrorCode::UnknownGrammar, "the synthetic model does not write " + grammar_id);
}

SyntheticModel::SyntheticModel(SyntheticModelOptions options) : options_(std::move(options)) {}

SyntheticModel SyntheticModel::for_corpus(const fs::path& corpus_dir, FaultSchedule faults) {
  SyntheticModelOptions o;
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(corpus_dir))
    if (e.path().extension() == ".csv" || e.path().extension() == ".json") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    auto s = summary::build_base_summary(summary::ingest(f));
    o.datasets.emplace(s.name, std::move(s));
  }
  o.faults = std::move(faults);
  return SyntheticModel(std::move(o));
}

const DatasetSummary* SyntheticModel::dataset(const std::string& name) const {
  auto it = options_.datasets.find(name);
  return it == options_.datasets.end() ? nullptr : &it->second;
}

const DatasetSummary* SyntheticModel::guess_dataset(const std::string& text) const {
  const DatasetSummary* best = nullptr;
  std::size_t best_hits = 0;
  for (const auto& [name, s] : options_.datasets) {
    const auto hits = mentioned_fields(text, s).size();
    if (hits > best_hits) {
      best = &s;
      best_hits = hits;
    }
  }
  return best;
}

llm::ProviderPtr SyntheticModel::provider() const {
  auto self = std::make_shared<SyntheticModel>(*this);
  return std::make_shared<llm::ScriptedProvider>(
      [self](const llm::PromptRequest& r, const llm::GenerationConfig& c) { return self->reply(r, c); }, "synthetic");
}

std::vector<std::string> SyntheticModel::reply(const llm::PromptRequest& r, const llm::GenerationConfig& config) const {
  const auto task = r.task();
  const int n = std::max(1, config.n_candidates);
  if (task == "enrich") return {enrich(r)};
  if (task == "goals") return {goals(r, 0)};
  if (task == "codegen") return codegen(r, n);
  if (task == "score") return {score(r)};
  if (task.rfind("evaluate/", 0) == 0) return {evaluate(r, task.substr(9))};
  if (task == "refine") return {refine(r)};
  if (task == "repair") return {repair(r)};
  if (task == "explain") return {explain(r)};
  if (task == "recommend") return {recommend(r)};
  return {"I am not sure what to do with this request."};
}

std::string SyntheticModel::enrich(const llm::PromptRequest& r) const {
  const auto* s = dataset(r.metadata.count("dataset") ? r.metadata.at("dataset") : "");
  if (!s) return "{}";
  auto semantic = [](const FieldProfile& f) -> std::string {
    const auto n = text::to_lower(f.name);
    const std::vector<std::pair<std::string, std::string>> known = {
        {"date", "date"},       {"year", "year"},         {"country", "country"},   {"origin", "country"},
        {"price", "price"},     {"temp", "temperature"},  {"mass", "weight"},       {"weight", "weight"},
        {"species", "species"}, {"island", "location"},   {"name", "name"},         {"pop", "population"},
        {"mpg", "miles_per_gallon"}, {"symbol", "ticker_symbol"}, {"wind", "wind_speed"},
        {"precipitation", "precipitation"}, {"life", "life_expectancy"}, {"fertility", "fertility_rate"},
        {"sex", "sex"},         {"weather", "weather_condition"}, {"hp", "horsepower"}};
    for (const auto& [k, v] : known)
      if (n.find(k) != std::string::npos) return v;
    if (f.atomic_type == AtomicType::Boolean) return "flag";
    if (is_numeric(f)) return "quantity";
    return "category";
  };
  nlohmann::ordered_json out;
  out["dataset_description"] =
      fmt::format("A table of {} records describing {} through {} fields.", s->row_count, s->name, s->fields.size());
  auto fields = nlohmann::ordered_json::array();
  for (const auto& f : s->fields) {
    const auto st = semantic(f);
    auto words = st;
    std::replace(words.begin(), words.end(), '_', ' ');
    fields.push_back({{"name", f.name},
                      {"description", fmt::format("The {} recorded for each row.", words)},
                      {"semantic_type", st}});
  }
  out["fields"] = fields;
  return "```json\n" + out.dump(2) + "\n```";
}

std::string SyntheticModel::goals(const llm::PromptRequest& r, int) const {
  const auto* s = dataset(r.metadata.count("dataset") ? r.metadata.at("dataset") : "");
  if (!s) return "[]";
  int n = 5;
  const auto& msg = last_user(r);
  if (auto pos = msg.find("Generate exactly "); pos != std::string::npos)
    if (auto m = text::first_integer(std::string_view(msg).substr(pos))) n = static_cast<int>(m->value);
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& g : propose_goals(*s, n))
    arr.push_back({{"question", g.question}, {"visualization", g.visualization}, {"rationale", g.rationale}});
  return "```json\n" + arr.dump(2) + "\n```";
}

std::vector<std::string> SyntheticModel::codegen(const llm::PromptRequest& r, int n) const {
  const auto& msg = last_user(r);
  const auto grammar = r.metadata.count("grammar") ? r.metadata.at("grammar") : "vegalite";
  const auto question = line_after(msg, "Goal: ");
  const auto visualization = line_after(msg, "Visualization: ");
  const DatasetSummary* s = r.metadata.count("dataset") ? dataset(r.metadata.at("dataset")) : nullptr;
  if (!s) s = guess_dataset(visualization + " " + question);
  if (!s) return std::vector<std::string>(static_cast<std::size_t>(n), "I cannot tell which dataset this is.");
  ChartPlan plan;
  try {
    plan = plan_chart(question, visualization, *s);
  } catch (const Error&) {
    return std::vector<std::string>(static_cast<std::size_t>(n), "The goal does not name a field I can plot.");
  }
  Fault fault = Fault::None;
  if (options_.faults) {
    const int goal_index = r.metadata.count("goal_index") ? std::stoi(r.metadata.at("goal_index")) : 0;
    const auto condition = r.metadata.count("condition") ? r.metadata.at("condition") : "";
    fault = options_.faults(s->name, condition, goal_index, grammar);
  }
  std::vector<std::string> out;
  for (int i = 0; i < n; ++i) {
    std::string stub;
    switch (i % 4) {
      case 0:
        stub = render_stub(plan, grammar, fault);
        break;
      case 1:
        // Same program, different layout.
        if (grammar == "vegalite") {
          stub = "  " + vegalite_members(vegalite_object(plan), true);
        } else {
          stub = "    # draw the chart\n" + render_stub(plan, grammar);
        }
        break;
      case 2: {
        auto alt = plan;
        alt.title += " (draft)";
        stub = render_stub(alt, grammar);
        break;
      }
      default:
        stub = render_stub(plan, grammar, Fault::Syntax);
    }
    out.push_back(fence(grammar, stub));
  }
  return out;
}

std::string SyntheticModel::score(const llm::PromptRequest& r) const {
  const auto code = section(last_user(r), "Code:\n", "\n\nProbability:");
  if (looks_broken(code)) return "0.05";
  if (code.find("(draft)") != std::string::npos) return "0.6";
  return "0.9";
}

std::string SyntheticModel::evaluate(const llm::PromptRequest& r, const std::string& dimension) const {
  const auto code = section(last_user(r), "Code:\n```\n", "\n```\n\nDimension:");
  const bool pie = is_pie_code(code);
  const bool titled = code.find("\"title\"") != std::string::npos || code.find("set_title(") != std::string::npos;
  if (looks_broken(code)) return "2: The code does not parse, so no chart is produced.";
  if (dimension == "code_accuracy") return "9: The code is complete and only references fields present in the data.";
  if (dimension == "data_transformation") return "8: Aggregation and grouping match the question.";
  if (dimension == "goal_compliance")
    return pie ? "6: The chart answers the question, but comparing slices is imprecise."
               : "9: The chart directly answers the stated question.";
  if (dimension == "visualization_type")
    return pie ? "3: A pie chart makes category sizes hard to compare; a bar chart of counts would work better."
               : "9: The chart type suits the field types involved.";
  if (dimension == "data_encoding") return "8: Fields are mapped to sensible channels with appropriate types.";
  if (dimension == "aesthetics")
    return titled ? "8: The chart is titled and its axes are labelled." : "6: The chart lacks a title.";
  return "5: No specific observations.";
}

std::string SyntheticModel::refine(const llm::PromptRequest& r) const {
  const auto& msg = last_user(r);
  const auto grammar = r.metadata.count("grammar") ? r.metadata.at("grammar") : "vegalite";
  const auto stub = section(msg, "Current code for <stub>:\n```\n", "\n```\n\nInstruction: ");
  const auto instruction = msg.substr(msg.find("\nInstruction: ") + 14);
  const auto lower = text::to_lower(instruction);
  const auto title = quoted(instruction);

  if (grammar != "vegalite") {
    std::string out = stub;
    std::vector<std::string> extra;
    if (lower.find("title") != std::string::npos && title) {
      auto lines = text::split_lines(out);
      for (auto& l : lines)
        if (l.find("ax.set_title(") != std::string::npos) l = "    ax.set_title(" + q(*title) + ")";
      out = text::join(lines, "\n");
    }
    if (lower.find("grid") != std::string::npos) extra.push_back("    ax.grid(True, alpha=0.3)");
    if (lower.find("rotate") != std::string::npos) extra.push_back("    plt.xticks(rotation=45, ha=\"right\")");
    if (auto c = color_word(lower)) {
      extra.push_back("    for patch in ax.patches:");
      extra.push_back("        patch.set_facecolor(" + q(*c) + ")");
    }
    if (!extra.empty()) out = python_insert(out, extra);
    return fence(grammar, out);
  }

  auto spec = nlohmann::ordered_json::parse("{" + stub + "}", nullptr, false);
  if (spec.is_discarded()) return fence(grammar, stub);
  auto& enc = spec["encoding"];
  if (title && lower.find("title") != std::string::npos) spec["title"] = *title;
  if (lower.find("horizontal") != std::string::npos || lower.find("swap") != std::string::npos ||
      lower.find("flip") != std::string::npos) {
    if (enc.contains("x") && enc.contains("y")) std::swap(enc["x"], enc["y"]);
  }
  if (lower.find("sort") != std::string::npos && enc.contains("x")) enc["x"]["sort"] = "-y";
  // Switching the mark type keeps properties such as color from earlier turns.
  auto set_mark = [&](const std::string& type) {
    if (spec["mark"].is_object())
      spec["mark"]["type"] = type;
    else
      spec["mark"] = type;
  };
  if (token_pos(lower, "line")) set_mark("line");
  if (token_pos(lower, "scatter") || token_pos(lower, "points")) set_mark("point");
  if (token_pos(lower, "bars") || lower.find("bar chart") != std::string::npos) set_mark("bar");
  if (lower.find("color") != std::string::npos || lower.find("colour") != std::string::npos || color_word(lower)) {
    const DatasetSummary* s = guess_dataset(stub);
    const FieldProfile* field = nullptr;
    if (s)
      for (const auto* f : mentioned_fields(instruction, *s))
        if (!field) field = f;
    if (field) {
      enc["color"] = {{"field", field->name}, {"type", is_numeric(*field) ? "quantitative" : "nominal"}};
    } else if (auto c = color_word(lower)) {
      const auto mark = spec["mark"].is_string() ? spec["mark"].get<std::string>() : spec["mark"].value("type", "bar");
      spec["mark"] = {{"type", mark}, {"color", *c}};
    }
  }
  return fence(grammar, vegalite_members(spec, false));
}

std::string SyntheticModel::repair(const llm::PromptRequest& r) const {
  const auto& msg = last_user(r);
  const auto grammar = r.metadata.count("grammar") ? r.metadata.at("grammar") : "vegalite";
  const auto code = section(msg, "Current code for <stub>:\n```\n", "\n```\n\nCritique:");
  const auto critique = section(msg, "\nCritique:\n", "\nA previous fix");
  const auto question = line_after(msg, "Goal: ");
  const auto visualization = line_after(msg, "Visualization: ");
  const auto* s = guess_dataset(visualization + " " + question);
  if (!s) s = guess_dataset(code);
  if (!s) return fence(grammar, code);
  ChartPlan plan;
  try {
    plan = plan_chart(question, visualization, *s);
  } catch (const Error&) {
    return fence(grammar, code);
  }
  if (plan.kind == ChartKind::Pie) {
    plan.kind = ChartKind::Count;
    plan.title = default_title(plan);
  }
  if (critique.find("aesthetics") != std::string::npos && plan.title.empty()) plan.title = default_title(plan);
  return fence(grammar, render_stub(plan, grammar));
}

std::string SyntheticModel::explain(const llm::PromptRequest& r) const {
  const auto code = section(last_user(r), "Code:\n```\n", "\n```");
  std::vector<std::string> steps;
  std::string kind = "chart";
  std::string title;
  auto spec = nlohmann::json::parse(code, nullptr, false);
  if (!spec.is_discarded() && spec.is_object()) {
    steps.push_back("The specification loads the dataset from its URL.");
    const auto mark = spec.contains("mark") ? (spec["mark"].is_string() ? spec["mark"].get<std::string>()
                                                                         : spec["mark"].value("type", "mark"))
                                            : "mark";
    kind = mark == "arc" ? "pie chart" : mark + " chart";
    steps.push_back(fmt::format("It draws `{}` marks.", mark));
    if (spec.contains("encoding"))
      for (const auto& [channel, def] : spec["encoding"].items()) {
        if (!def.is_object()) continue;
        if (def.contains("field"))
          steps.push_back(fmt::format("The `{}` channel encodes `{}` as {}{}.", channel, def["field"].get<std::string>(),
                                      def.value("type", "a value"),
                                      def.contains("aggregate") ? " (" + def["aggregate"].get<std::string>() + ")" : ""));
        else if (def.contains("aggregate"))
          steps.push_back(fmt::format("The `{}` channel shows the {} of records.", channel,
                                      def["aggregate"].get<std::string>()));
      }
    if (spec.contains("title") && spec["title"].is_string()) title = spec["title"].get<std::string>();
  } else {
    for (const auto& raw : text::split_lines(code)) {
      const auto l = text::trim(raw);
      if (l.find("groupby(") != std::string::npos) steps.push_back("Groups the rows and aggregates each group: `" + l + "`.");
      else if (l.find("value_counts(") != std::string::npos) steps.push_back("Counts the records per category: `" + l + "`.");
      else if (l.rfind("ax.bar(", 0) == 0 || l.rfind("sns.barplot", 0) == 0 || l.rfind("sns.countplot", 0) == 0) kind = "bar chart", steps.push_back("Draws bars: `" + l + "`.");
      else if (l.rfind("ax.pie(", 0) == 0) kind = "pie chart", steps.push_back("Draws a pie: `" + l + "`.");
      else if (l.find("scatter") != std::string::npos) kind = "scatter plot", steps.push_back("Draws points: `" + l + "`.");
      else if (l.rfind("ax.plot(", 0) == 0 || l.rfind("sns.lineplot", 0) == 0) kind = "line chart", steps.push_back("Draws lines: `" + l + "`.");
      else if (l.find("hist") != std::string::npos) kind = "histogram", steps.push_back("Bins the values: `" + l + "`.");
      else if (l.rfind("ax.set_title(", 0) == 0) {
        steps.push_back("Sets the title.");
        if (auto t = quoted(l)) title = *t;
      } else if (l.rfind("ax.set_", 0) == 0) steps.push_back("Labels an axis: `" + l + "`.");
    }
  }
  std::string out = "## Code walkthrough\n";
  for (std::size_t i = 0; i < steps.size(); ++i) out += fmt::format("{}. {}\n", i + 1, steps[i]);
  if (steps.empty()) out += "The code builds a chart from the dataset.\n";
  out += "\n## Accessibility description\n";
  out += title.empty() ? fmt::format("A {} drawn from the dataset.\n", kind)
                       : fmt::format("A {} titled \"{}\".\n", kind, title);
  return out;
}

std::string SyntheticModel::recommend(const llm::PromptRequest& r) const {
  const auto* s = dataset(r.metadata.count("dataset") ? r.metadata.at("dataset") : "");
  if (!s) return "[]";
  const auto& msg = last_user(r);
  int k = 3;
  if (auto pos = msg.find("\nSuggest "); pos != std::string::npos)
    if (auto m = text::first_integer(std::string_view(msg).substr(pos))) k = static_cast<int>(m->value);
  const auto current = line_after(msg, "Current visualization: ");
  nlohmann::json arr = nlohmann::json::array();
  auto proposals = propose_goals(*s, k + 6);
  // Leads with the visualization already on screen; callers drop it.
  for (const auto& g : proposals)
    if (g.visualization == current)
      arr.push_back({{"question", g.question}, {"visualization", g.visualization}, {"rationale", g.rationale}});
  for (auto it = proposals.rbegin(); it != proposals.rend() && static_cast<int>(arr.size()) < k + 1; ++it)
    if (it->visualization != current)
      arr.push_back({{"question", it->question}, {"visualization", it->visualization}, {"rationale", it->rationale}});
  return "```json\n" + arr.dump(2) + "\n```";
}

FaultSchedule exact_faults(const std::vector<std::string>& datasets, const std::vector<std::string>& conditions,
                           int goals_per_dataset, int k, unsigned seed) {
  std::vector<std::string> keys;
  for (const auto& d : datasets)
    for (const auto& c : conditions)
      for (int g = 0; g < goals_per_dataset; ++g) keys.push_back(fmt::format("{}|{}|{}", d, c, g));
  if (k < 0 || k > static_cast<int>(keys.size()))
    raise(ErrorCode::PreconditionViolation, fmt::format("cannot break {} of {} runs", k, keys.size()));
  std::mt19937 rng(seed);
  // Fisher-Yates with an explicit draw keeps the choice identical across
  // standard library implementations.
  for (std::size_t i = keys.size(); i > 1; --i) std::swap(keys[i - 1], keys[rng() % i]);
  auto broken = std::make_shared<std::set<std::string>>(keys.begin(), keys.begin() + k);
  return [broken](const std::string& d, const std::string& c, int g, const std::string&) {
    return broken->count(fmt::format("{}|{}|{}", d, c, g)) ? Fault::Syntax : Fault::None;
  };
}

FaultSchedule ablation_faults(const std::vector<std::string>& datasets) {
  auto index = std::make_shared<std::map<std::string, int>>();
  for (std::size_t i = 0; i < datasets.size(); ++i) (*index)[datasets[i]] = static_cast<int>(i);
  return [index](const std::string& d, const std::string& c, int g, const std::string&) {
    auto it = index->find(d);
    if (it == index->end()) return Fault::None;
    const int di = it->second;
    if (c == "no_summary" && (g == 1 || (g == 3 && di % 2 == 0))) return Fault::UnknownField;
    if (c == "schema" && g == 2 && di % 2 == 1) return Fault::UnknownField;
    if (c == "no_enrich" && g == 4 && di == 4) return Fault::Syntax;
    return Fault::None;
  };
}

}  // namespace vizpipe::fixtures
