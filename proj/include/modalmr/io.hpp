#pragma once

#include <charconv>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "error.hpp"
#include "kernels.hpp"
#include "markov.hpp"
#include "solver.hpp"

namespace modalmr::io {

namespace detail {

/// Whitespace tokenizer that reports the line of each failure.
class TokenReader
{
public:
    TokenReader(std::istream& in, std::string what) : in_(in), what_(std::move(what)) {}

    std::string word()
    {
        while (pos_ >= tokens_.size()) {
            std::string line;
            if (!std::getline(in_, line)) fail("unexpected end of input");
            ++line_no_;
            tokens_.clear();
            pos_ = 0;
            std::istringstream ls(line);
            for (std::string t; ls >> t;) tokens_.push_back(t);
        }
        return tokens_[pos_++];
    }

    double number()
    {
        const std::string t = word();
        double v = 0.0;
        const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
        if (ec != std::errc() || ptr != t.data() + t.size()) fail("expected a number, got '" + t + "'");
        return v;
    }

    long integer()
    {
        const std::string t = word();
        long v = 0;
        const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
        if (ec != std::errc() || ptr != t.data() + t.size()) fail("expected an integer, got '" + t + "'");
        return v;
    }

    void expect(const std::string& keyword)
    {
        const std::string t = word();
        if (t != keyword) fail("expected '" + keyword + "', got '" + t + "'");
    }

    /// Fails if anything but whitespace remains.
    void finish()
    {
        if (pos_ < tokens_.size()) fail("trailing token '" + tokens_[pos_] + "'");
        std::string line;
        while (std::getline(in_, line)) {
            ++line_no_;
            if (line.find_first_not_of(" \t\r") != std::string::npos) fail("trailing content");
        }
    }

    [[noreturn]] void fail(const std::string& msg) const
    {
        throw ParseError(what_ + " line " + std::to_string(line_no_) + ": " + msg);
    }

private:
    std::istream& in_;
    std::string what_;
    std::vector<std::string> tokens_;
    std::size_t pos_ = 0;
    int line_no_ = 0;
};

inline std::string full(double v) { return format_g(v, 17); }

} // namespace detail

// ---------------------------------------------------------------------------
// Chain file: "n d", n rows of P, then n rows of embedding coordinates.
// ---------------------------------------------------------------------------

inline TransitionKernel read_chain(std::istream& in, const std::string& name = "chain file")
{
    detail::TokenReader r(in, name);
    const long n = r.integer(), d = r.integer();
    if (n < 1 || d < 1) r.fail("n and d must be positive");
    Eigen::MatrixXd p(n, n);
    for (long i = 0; i < n; ++i)
        for (long j = 0; j < n; ++j) p(i, j) = r.number();
    Points emb(n, d);
    for (long i = 0; i < n; ++i)
        for (long j = 0; j < d; ++j) emb(i, j) = r.number();
    r.finish();
    return TransitionKernel(std::move(p), std::move(emb));
}

inline void write_chain(std::ostream& out, const TransitionKernel& k)
{
    out << k.n_states() << ' ' << k.dim() << '\n';
    for (Eigen::Index i = 0; i < k.n_states(); ++i) {
        for (Eigen::Index j = 0; j < k.n_states(); ++j) out << (j ? " " : "") << detail::full(k.matrix()(i, j));
        out << '\n';
    }
    for (Eigen::Index i = 0; i < k.n_states(); ++i) {
        for (Eigen::Index j = 0; j < k.dim(); ++j) out << (j ? " " : "") << detail::full(k.embedding()(i, j));
        out << '\n';
    }
}

// ---------------------------------------------------------------------------
// Dataset file: "m d", then m lines of d covariates followed by y.
// ---------------------------------------------------------------------------

struct LabeledData
{
    Points x;
    Eigen::VectorXd y;
};

inline LabeledData read_dataset(std::istream& in, const std::string& name = "dataset file")
{
    detail::TokenReader r(in, name);
    const long m = r.integer(), d = r.integer();
    if (m < 1 || d < 1) r.fail("m and d must be positive");
    LabeledData out{Points(m, d), Eigen::VectorXd(m)};
    for (long i = 0; i < m; ++i) {
        for (long j = 0; j < d; ++j) out.x(i, j) = r.number();
        out.y(i) = r.number();
    }
    r.finish();
    return out;
}

inline void write_dataset(std::ostream& out, const Points& x, const Eigen::VectorXd& y)
{
    if (x.rows() != y.size()) throw DimensionMismatch("dataset has " + std::to_string(x.rows()) + " inputs and " +
                                                      std::to_string(y.size()) + " labels");
    out << x.rows() << ' ' << x.cols() << '\n';
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        for (Eigen::Index j = 0; j < x.cols(); ++j) out << detail::full(x(i, j)) << ' ';
        out << detail::full(y(i)) << '\n';
    }
}

/// Covariates only: "m d", then m lines of d values.
inline Points read_inputs(std::istream& in, const std::string& name = "input file")
{
    detail::TokenReader r(in, name);
    const long m = r.integer(), d = r.integer();
    if (m < 1 || d < 1) r.fail("m and d must be positive");
    Points x(m, d);
    for (long i = 0; i < m; ++i)
        for (long j = 0; j < d; ++j) x(i, j) = r.number();
    r.finish();
    return x;
}

// ---------------------------------------------------------------------------
// Model file. Values carry 17 significant digits, so a write/read round trip
// reproduces every double exactly.
// ---------------------------------------------------------------------------

inline void write_model(std::ostream& out, const RmrModel& model)
{
    const Eigen::Index m = model.alpha.size(), d = model.train_inputs.cols();
    out << "modalmr-model 1\n";
    out << "m " << m << "\nd " << d << '\n';
    out << "kernel " << to_string(model.kernel.kind());
    for (const auto& [k, v] : model.kernel.shape_params()) out << ' ' << k << '=' << detail::full(v);
    out << '\n';
    out << "phi " << to_string(model.config.phi.kind()) << '\n';
    out << "sigma " << detail::full(model.config.sigma) << '\n';
    out << "lambda " << detail::full(model.config.lambda) << '\n';
    out << "q " << to_string(model.config.q) << '\n';
    out << "alpha\n";
    for (Eigen::Index i = 0; i < m; ++i) out << detail::full(model.alpha(i)) << '\n';
    out << "inputs\n";
    for (Eigen::Index i = 0; i < m; ++i) {
        for (Eigen::Index j = 0; j < d; ++j) out << (j ? " " : "") << detail::full(model.train_inputs(i, j));
        out << '\n';
    }
}

inline RmrModel read_model(std::istream& in, const std::string& name = "model file")
{
    // The kernel line has a variable number of tokens, so read it whole.
    std::vector<std::string> head;
    for (std::string line; head.size() < 4 && std::getline(in, line);) head.push_back(line);
    if (head.size() < 4 || head[0] != "modalmr-model 1") throw ParseError(name + ": missing 'modalmr-model 1' header");
    std::istringstream rest_header(head[1] + "\n" + head[2] + "\n");
    detail::TokenReader hr(rest_header, name);
    hr.expect("m");
    const long m = hr.integer();
    hr.expect("d");
    const long d = hr.integer();
    if (m < 1 || d < 1) throw ParseError(name + ": m and d must be positive");

    std::istringstream kl(head[3]);
    std::string tag, kind;
    kl >> tag >> kind;
    if (tag != "kernel") throw ParseError(name + " line 4: expected 'kernel'");
    std::map<std::string, double> params;
    for (std::string kv; kl >> kv;) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw ParseError(name + " line 4: expected key=value, got '" + kv + "'");
        double v = 0.0;
        const std::string val = kv.substr(eq + 1);
        const auto [ptr, ec] = std::from_chars(val.data(), val.data() + val.size(), v);
        if (ec != std::errc() || ptr != val.data() + val.size())
            throw ParseError(name + " line 4: bad number '" + val + "'");
        params[kv.substr(0, eq)] = v;
    }

    detail::TokenReader r(in, name);
    RmrConfig cfg;
    r.expect("phi");
    cfg.phi = parse_phi(r.word());
    r.expect("sigma");
    cfg.sigma = r.number();
    r.expect("lambda");
    cfg.lambda = r.number();
    r.expect("q");
    cfg.q = parse_penalty(r.word());
    cfg.validate();
    r.expect("alpha");
    Eigen::VectorXd alpha(m);
    for (long i = 0; i < m; ++i) alpha(i) = r.number();
    r.expect("inputs");
    Points x(m, d);
    for (long i = 0; i < m; ++i)
        for (long j = 0; j < d; ++j) x(i, j) = r.number();
    r.finish();
    return RmrModel{std::move(alpha), std::move(x), make_kernel(parse_kernel_kind(kind), params), cfg, {},
                    Termination::Converged};
}

// ---------------------------------------------------------------------------
// Flat config: one "key = value" per line, '#' starts a comment.
// ---------------------------------------------------------------------------

inline std::vector<std::pair<std::string, std::string>> read_flat_config(std::istream& in,
                                                                         const std::string& name = "config file")
{
    auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t\r");
        if (b == std::string::npos) return std::string();
        const auto e = s.find_last_not_of(" \t\r");
        return s.substr(b, e - b + 1);
    };
    std::vector<std::pair<std::string, std::string>> out;
    int line_no = 0;
    for (std::string line; std::getline(in, line);) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ParseError(name + " line " + std::to_string(line_no) + ": expected 'key = value'");
        std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
        if (key.empty()) throw ParseError(name + " line " + std::to_string(line_no) + ": empty key");
        out.emplace_back(std::move(key), std::move(value));
    }
    return out;
}

} // namespace modalmr::io
