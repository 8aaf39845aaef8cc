#include <agmm/io.hpp>

#include <json.hpp>

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <system_error>

namespace agmm {

using nlohmann::json;

namespace {

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(trim(field));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_number(const std::string& s, std::size_t line) {
  double v = 0.0;
  const char* first = s.data();
  if (!s.empty() && s.front() == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
    throw IoError("line " + std::to_string(line) + ": '" + s + "' is not a number");
  if (!std::isfinite(v)) throw IoError("line " + std::to_string(line) + ": non-finite value");
  return v;
}

json vec(const Eigen::VectorXd& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

json rows(const Eigen::MatrixXd& m) {
  json out = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    std::vector<double> row(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index j = 0; j < m.cols(); ++j) row[static_cast<std::size_t>(j)] = m(i, j);
    out.push_back(row);
  }
  return out;
}

Eigen::VectorXd to_vec(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Eigen::MatrixXd to_rows(const json& j, Eigen::Index cols_if_empty = 0) {
  if (!j.is_array()) throw IoError("expected an array of rows");
  if (j.empty()) return Eigen::MatrixXd(0, cols_if_empty);
  const auto cols = static_cast<Eigen::Index>(j.front().size());
  Eigen::MatrixXd m(static_cast<Eigen::Index>(j.size()), cols);
  for (std::size_t i = 0; i < j.size(); ++i) {
    const auto row = j[i].get<std::vector<double>>();
    if (static_cast<Eigen::Index>(row.size()) != cols) throw IoError("ragged matrix in model file");
    for (Eigen::Index c = 0; c < cols; ++c) m(static_cast<Eigen::Index>(i), c) = row[static_cast<std::size_t>(c)];
  }
  return m;
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json kernel_json(const Kernel& k) { return {{"shape", k.shape_name()}, {"h", k.h}}; }

Kernel kernel_from(const json& j) { return Kernel::parse_shape(j.at("shape").get<std::string>(), j.at("h").get<double>()); }

json basis_json(const Basis& b) {
  if (b.kind() != Basis::Kind::polynomial) throw InvalidArgument("only polynomial bases can be serialized");
  return {{"kind", "polynomial"}, {"degree", b.degree()}, {"p", b.p()}};
}

Basis basis_from(const json& j) {
  const auto kind = j.at("kind").get<std::string>();
  if (kind != "polynomial") throw IoError("unsupported basis kind '" + kind + "'");
  return Basis::polynomial(j.at("degree").get<int>(), j.value("p", std::size_t{1}));
}

}  // namespace

// ---- datasets --------------------------------------------------------------

CsvDataset parse_dataset_csv(std::istream& in) {
  std::string line;
  std::size_t lineno = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++lineno;
    if (!trim(line).empty()) {
      header = split_fields(line);
      break;
    }
  }
  if (header.size() < 2) throw IoError("dataset CSV needs a header 'x1,...,xp,theta'");
  const std::size_t p = header.size() - 1;
  for (std::size_t j = 0; j < p; ++j)
    if (header[j] != "x" + std::to_string(j + 1))
      throw IoError("unexpected header column '" + header[j] + "', expected 'x" + std::to_string(j + 1) + "'");
  if (header.back() != "theta") throw IoError("last header column must be 'theta'");

  std::vector<double> xs, thetas;
  std::size_t wrapped = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != p + 1)
      throw IoError("line " + std::to_string(lineno) + ": expected " + std::to_string(p + 1) + " fields");
    for (std::size_t j = 0; j < p; ++j) xs.push_back(parse_number(fields[j], lineno));
    const double t = parse_number(fields[p], lineno);
    if (!(t >= -kPi && t < kPi)) ++wrapped;
    thetas.push_back(Angle::principal(t).value());
  }
  if (thetas.empty()) throw IoError("dataset CSV has no rows");
  Eigen::MatrixXd x(static_cast<Eigen::Index>(thetas.size()), static_cast<Eigen::Index>(p));
  for (std::size_t i = 0; i < thetas.size(); ++i)
    for (std::size_t j = 0; j < p; ++j) x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = xs[i * p + j];
  return CsvDataset{Dataset::from_radians(std::move(x), thetas), wrapped};
}

CsvDataset read_dataset_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return parse_dataset_csv(in);
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

void write_dataset_csv(std::ostream& out, const Dataset& data) {
  for (std::size_t j = 0; j < data.p(); ++j) out << 'x' << (j + 1) << ',';
  out << "theta\n";
  for (std::size_t i = 0; i < data.n(); ++i) {
    for (std::size_t j = 0; j < data.p(); ++j)
      out << format_double(data.x()(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))) << ',';
    out << format_double(data.theta(i)) << '\n';
  }
}

// ---- models ----------------------------------------------------------------

std::string model_to_json(const SavedModel& saved) {
  json j;
  j["method"] = saved.method;
  std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, ParametricAgmm>) {
          j["type"] = "parametric";
          j["basis"] = basis_json(m.basis());
          j["beta"] = vec(m.beta());
          j["sigma2"] = m.sigma2();
          j["r"] = vec(m.r());
          j["K"] = m.K();
        } else if constexpr (std::is_same_v<T, KernelModel>) {
          j["type"] = "nonparametric";
          j["kernel"] = kernel_json(m.kernel);
          j["grid"] = rows(m.model.grid());
          j["mu"] = vec(m.model.mu());
          j["sigma2"] = vec(m.model.sigma2());
          j["r"] = rows(m.model.r());
          j["K"] = m.model.K();
        } else {
          j["type"] = "smoothing";
          j["kernel"] = kernel_json(m.kernel());
          j["allow_degenerate"] = m.allow_degenerate();
          j["x"] = rows(m.data().x());
          std::vector<double> th(m.data().n());
          for (std::size_t i = 0; i < th.size(); ++i) th[i] = m.data().theta(i);
          j["theta"] = th;
        }
      },
      saved.model);
  return j.dump(2) + "\n";
}

SavedModel model_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    const auto type = j.at("type").get<std::string>();
    const auto method = j.value("method", type);
    if (type == "parametric") {
      ParametricAgmm m(basis_from(j.at("basis")), to_vec(j.at("beta")), j.at("sigma2").get<double>(), to_vec(j.at("r")));
      if (j.contains("K") && j["K"].get<int>() != m.K()) throw IoError("model K does not match the weight vector");
      return {method, m};
    }
    if (type == "nonparametric") {
      const auto K = j.at("K").get<int>();
      NonparametricAgmm m(to_rows(j.at("grid")), to_vec(j.at("mu")), to_vec(j.at("sigma2")), to_rows(j.at("r"), K));
      return {method, KernelModel{std::move(m), kernel_from(j.at("kernel"))}};
    }
    if (type == "smoothing") {
      const auto th = j.at("theta").get<std::vector<double>>();
      Smoother s(Dataset::from_radians(to_rows(j.at("x")), th), kernel_from(j.at("kernel")),
                 j.value("allow_degenerate", false));
      return {method, std::move(s)};
    }
    throw IoError("unknown model type '" + type + "'");
  } catch (const json::exception& e) {
    throw IoError(std::string("malformed model file: ") + e.what());
  }
}

Angle predict(const Model& model, std::span<const double> x) {
  return std::visit(
      [&](const auto& m) -> Angle {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, KernelModel>)
          return predict_mean(m.model, x);
        else if constexpr (std::is_same_v<T, ParametricAgmm>)
          return predict_mean(m, x);
        else
          return m.predict(x);
      },
      model);
}

std::optional<double> variance_at(const Model& model, std::span<const double> x) {
  if (const auto* p = std::get_if<ParametricAgmm>(&model)) return p->sigma2();
  if (const auto* k = std::get_if<KernelModel>(&model)) return k->model.interpolate(x).sigma2;
  return std::nullopt;
}

// ---- reports and metadata ---------------------------------------------------

std::string report_to_json(const FitReport& report) {
  json j;
  j["loglik_trace"] = report.loglik_trace;
  j["iterations"] = report.iterations;
  j["converged"] = report.converged;
  j["bic"] = number_or_null(report.bic);
  j["selected_K"] = report.selected_K;
  j["selected_h"] = report.selected_h ? json(*report.selected_h) : json(nullptr);
  j["candidates"] = json::array();
  for (const auto& c : report.candidates) {
    json cj{{"K", c.K},
            {"h", c.h ? json(*c.h) : json(nullptr)},
            {"loglik", number_or_null(c.loglik)},
            {"bic", number_or_null(c.bic)},
            {"ok", c.ok}};
    if (!c.message.empty()) cj["message"] = c.message;
    j["candidates"].push_back(cj);
  }
  return j.dump(2) + "\n";
}

std::string truth_to_json(const TruthInfo& info) {
  return json{{"example", info.example}, {"seed", info.seed}, {"sigma2_truth", info.sigma2_truth}}.dump(2) + "\n";
}

TruthInfo truth_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    return TruthInfo{j.at("example").get<int>(), j.at("seed").get<std::uint64_t>(), j.at("sigma2_truth").get<double>()};
  } catch (const json::exception& e) {
    throw IoError(std::string("malformed truth file: ") + e.what());
  }
}

void write_trace_csv(std::ostream& out, std::span<const GibbsTrace> chains) {
  if (chains.empty() || chains.front().draws.empty()) throw InvalidArgument("trace is empty");
  const auto& d0 = chains.front().draws.front();
  out << "chain,iter";
  for (Eigen::Index j = 0; j < d0.beta.size(); ++j) out << ",beta" << j;
  out << ",sigma2";
  for (Eigen::Index k = 0; k < d0.r.size(); ++k) out << ",r" << (k + 1);
  out << ",sigma0_2\n";
  for (std::size_t c = 0; c < chains.size(); ++c) {
    const auto& trace = chains[c];
    for (std::size_t t = static_cast<std::size_t>(trace.burn_in); t < trace.draws.size(); ++t) {
      const auto& d = trace.draws[t];
      out << (c + 1) << ',' << (t + 1);
      for (Eigen::Index j = 0; j < d.beta.size(); ++j) out << ',' << format_double(d.beta(j));
      out << ',' << format_double(d.sigma2);
      for (Eigen::Index k = 0; k < d.r.size(); ++k) out << ',' << format_double(d.r(k));
      out << ',' << format_double(d.sigma0_2) << '\n';
    }
  }
}

// ---- files -----------------------------------------------------------------

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_atomic(const std::filesystem::path& path, const std::string& text) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out << text;
    out.flush();
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot move output into place at " + path.string());
  }
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw InvalidState("format_double: buffer too small");
  return std::string(buf, ptr);
}

}  // namespace agmm
