#include "hjbrep/hamiltonian.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace hjb {

/* ---- expression parsing and evaluation ---- */

struct Expr::Node {
    enum Kind { num, var_t, var_x1, var_x2, var_xn, add, sub, mul, divide, power, neg, fexp, fabsk } k;
    double v = 0.0;
    std::shared_ptr<const Node> a, b;
};

namespace {

using NodePtr = std::shared_ptr<const Expr::Node>;

NodePtr mk(Expr::Node::Kind k, NodePtr a = nullptr, NodePtr b = nullptr, double v = 0.0) {
    auto n = std::make_shared<Expr::Node>();
    n->k = k;
    n->v = v;
    n->a = std::move(a);
    n->b = std::move(b);
    return n;
}

struct Parser {
    const std::string& s;
    size_t i = 0;

    void skip() {
        while (i < s.size() && std::isspace((unsigned char)s[i])) ++i;
    }
    bool eat(char c) {
        skip();
        if (i < s.size() && s[i] == c) {
            ++i;
            return true;
        }
        return false;
    }
    [[noreturn]] void fail(const std::string& what) const {
        throw ConfigError("expression \"" + s + "\", position " + std::to_string(i + 1) + ": " + what);
    }

    NodePtr expr() {
        NodePtr lhs = term();
        for (;;) {
            if (eat('+'))
                lhs = mk(Expr::Node::add, lhs, term());
            else if (eat('-'))
                lhs = mk(Expr::Node::sub, lhs, term());
            else
                break;
        }
        return lhs;
    }
    NodePtr term() {
        NodePtr lhs = unary();
        for (;;) {
            if (eat('*'))
                lhs = mk(Expr::Node::mul, lhs, unary());
            else if (eat('/'))
                lhs = mk(Expr::Node::divide, lhs, unary());
            else
                break;
        }
        return lhs;
    }
    NodePtr unary() {
        if (eat('-')) return mk(Expr::Node::neg, unary());
        return pow_();
    }
    NodePtr pow_() {
        NodePtr base = atom();
        if (eat('^')) return mk(Expr::Node::power, base, unary());
        return base;
    }
    NodePtr atom() {
        skip();
        if (i >= s.size()) fail("unexpected end of input");
        char c = s[i];
        if (c == '(') {
            ++i;
            NodePtr e = expr();
            if (!eat(')')) fail("missing ')'");
            return e;
        }
        if (c == '|') {
            ++i;
            skip();
            if (i < s.size() && s[i] == 'x') {
                ++i;
                if (!eat('|')) fail("missing closing '|'");
                return mk(Expr::Node::var_xn);
            }
            fail("only |x| is supported between bars");
        }
        if (std::isdigit((unsigned char)c) || c == '.') {
            const char* begin = s.c_str() + i;
            char* end = nullptr;
            double v = std::strtod(begin, &end);
            if (end == begin) fail("malformed number");
            i += (size_t)(end - begin);
            return mk(Expr::Node::num, nullptr, nullptr, v);
        }
        if (std::isalpha((unsigned char)c) || c == '_') {
            size_t j = i;
            while (j < s.size() && (std::isalnum((unsigned char)s[j]) || s[j] == '_')) ++j;
            std::string id = s.substr(i, j - i);
            i = j;
            if (id == "t") return mk(Expr::Node::var_t);
            if (id == "x1") return mk(Expr::Node::var_x1);
            if (id == "x2") return mk(Expr::Node::var_x2);
            if (id == "exp" || id == "abs") {
                if (!eat('(')) fail("'" + id + "' needs parentheses");
                NodePtr arg = expr();
                if (!eat(')')) fail("missing ')'");
                return mk(id == "exp" ? Expr::Node::fexp : Expr::Node::fabsk, arg);
            }
            fail("unknown name '" + id + "' (known: t, x1, x2, |x|, exp, abs)");
        }
        fail(std::string("unexpected character '") + c + "'");
    }
};

double eval_node(const Expr::Node& n, double t, const Vec& x) {
    using K = Expr::Node;
    switch (n.k) {
        case K::num: return n.v;
        case K::var_t: return t;
        case K::var_x1: return x[0];
        case K::var_x2: return x[1];
        case K::var_xn: return norm(x);
        case K::add: return eval_node(*n.a, t, x) + eval_node(*n.b, t, x);
        case K::sub: return eval_node(*n.a, t, x) - eval_node(*n.b, t, x);
        case K::mul: return eval_node(*n.a, t, x) * eval_node(*n.b, t, x);
        case K::divide: return eval_node(*n.a, t, x) / eval_node(*n.b, t, x);
        case K::power: return std::pow(eval_node(*n.a, t, x), eval_node(*n.b, t, x));
        case K::neg: return -eval_node(*n.a, t, x);
        case K::fexp: return std::exp(eval_node(*n.a, t, x));
        case K::fabsk: return std::fabs(eval_node(*n.a, t, x));
    }
    return 0.0;
}

bool node_uses(const Expr::Node& n, std::initializer_list<Expr::Node::Kind> kinds) {
    for (auto k : kinds)
        if (n.k == k) return true;
    return (n.a && node_uses(*n.a, kinds)) || (n.b && node_uses(*n.b, kinds));
}

} // namespace

Expr Expr::parse(const std::string& src) {
    Parser p{src};
    Expr e;
    e.root_ = p.expr();
    p.skip();
    if (p.i != src.size()) p.fail("trailing characters");
    e.src_ = src;
    return e;
}

Expr Expr::constant(double v) {
    Expr e;
    e.root_ = mk(Node::num, nullptr, nullptr, v);
    std::ostringstream os;
    os << v;
    e.src_ = os.str();
    return e;
}

double Expr::eval(double t, const Vec& x) const {
    if (!root_) throw NumericError("eval of empty expression");
    return eval_node(*root_, t, x);
}

bool Expr::depends_on_x() const {
    return root_ && node_uses(*root_, {Node::var_x1, Node::var_x2, Node::var_xn});
}

bool Expr::uses_x2() const { return root_ && node_uses(*root_, {Node::var_x2}); }

/* ---- Hamiltonian families ---- */

std::string family_name(HamiltonianFamily f) {
    switch (f) {
        case HamiltonianFamily::scaled_eikonal: return "scaled-eikonal";
        case HamiltonianFamily::sup_affine: return "sup-affine";
        case HamiltonianFamily::quadratic: return "quadratic";
    }
    return "?";
}

double HamiltonianSpec::eval(double t, const Vec& x, const Vec& p) const {
    switch (family) {
        case HamiltonianFamily::scaled_eikonal: {
            double s = a.eval(t, x) * norm(p) - c.eval(t, x);
            for (int d = 0; d < n; ++d) s += b[(size_t)d].eval(t, x) * p[d];
            return s;
        }
        case HamiltonianFamily::sup_affine: {
            double best = -kInf;
            for (const auto& pc : pieces) {
                double s = -pc.cost.eval(t, x);
                for (int d = 0; d < n; ++d) s += pc.drift[(size_t)d].eval(t, x) * p[d];
                best = std::max(best, s);
            }
            return best;
        }
        case HamiltonianFamily::quadratic:
            return 0.5 * a.eval(t, x) * dot(p, p) - c.eval(t, x);
    }
    return 0.0;
}

bool HamiltonianSpec::x_dependent() const {
    auto dep = [](const Expr& e) { return !e.empty() && e.depends_on_x(); };
    if (dep(a) || dep(c) || dep(b[0]) || dep(b[1])) return true;
    for (const auto& pc : pieces)
        if (dep(pc.drift[0]) || dep(pc.drift[1]) || dep(pc.cost)) return true;
    return false;
}

double HamiltonianSpec::slope_bound(double t0, double t1, const std::array<GridAxis, 2>& xbox) const {
    double worst = 0.0;
    GridAxis ts{t0, t1, 17};
    std::array<GridAxis, 2> xs = xbox;
    for (int d = 0; d < n; ++d) xs[(size_t)d].count = std::min(xs[(size_t)d].count, 17);
    for (int it = 0; it < ts.count; ++it) {
        double t = ts.at(it);
        for (int i = 0; i < xs[0].count; ++i)
            for (int j = 0; j < (n == 2 ? xs[1].count : 1); ++j) {
                Vec x = n == 1 ? Vec(xs[0].at(i)) : Vec(xs[0].at(i), xs[1].at(j));
                switch (family) {
                    case HamiltonianFamily::scaled_eikonal: {
                        double s = std::fabs(a.eval(t, x));
                        Vec bv(n);
                        for (int d = 0; d < n; ++d) bv[d] = b[(size_t)d].eval(t, x);
                        worst = std::max(worst, s + norm(bv));
                        break;
                    }
                    case HamiltonianFamily::sup_affine:
                        for (const auto& pc : pieces) {
                            Vec f(n);
                            for (int d = 0; d < n; ++d) f[d] = pc.drift[(size_t)d].eval(t, x);
                            worst = std::max(worst, norm(f));
                        }
                        break;
                    case HamiltonianFamily::quadratic:
                        /* slope at |p| = 4, the default sampling radius; the
                         * true slope has no uniform bound */
                        worst = std::max(worst, std::fabs(a.eval(t, x)) * 4.0);
                        break;
                }
            }
    }
    return worst;
}

Heval make_heval(const HamiltonianSpec& H) {
    return [H](double t, const Vec& x, const Vec& p) { return H.eval(t, x, p); };
}

AnalyticConjugate analytic_conjugate(const HamiltonianSpec& H, double t, const Vec& x) {
    AnalyticConjugate out;
    if (H.family == HamiltonianFamily::scaled_eikonal) {
        double av = H.a.eval(t, x);
        if (av < 0) throw AssumptionError("scaled eikonal needs a(t,x) >= 0 for a convex fiber");
        double cv = H.c.eval(t, x);
        Vec bv(H.n);
        for (int d = 0; d < H.n; ++d) bv[d] = H.b[(size_t)d].eval(t, x);
        out.available = true;
        if (H.n == 1)
            out.domain = make_interval(bv[0] - av, bv[0] + av);
        else {
            Vec ctr = bv;
            double R = av;
            out.domain = make_oracle(
                2,
                [ctr, R](const Vec& z) {
                    Vec d = z - ctr;
                    double r = norm(d);
                    return r <= R ? z : ctr + (R / r) * d;
                },
                ctr, R);
        }
        out.value = [cv](const Vec&) { return cv; };
        return out;
    }
    if (H.family == HamiltonianFamily::sup_affine) {
        if (H.pieces.empty()) throw ConfigError("sup-affine family needs at least one piece");
        if (H.n == 1) {
            std::vector<std::pair<double, double>> pts;
            for (const auto& pc : H.pieces)
                pts.push_back({pc.drift[0].eval(t, x), pc.cost.eval(t, x)});
            std::sort(pts.begin(), pts.end());
            /* keep only the cheapest cost at duplicate drifts, then the lower hull */
            std::vector<std::pair<double, double>> uniq;
            for (auto& pr : pts) {
                if (!uniq.empty() && std::fabs(uniq.back().first - pr.first) < 1e-12)
                    uniq.back().second = std::min(uniq.back().second, pr.second);
                else
                    uniq.push_back(pr);
            }
            std::vector<std::pair<double, double>> hull;
            for (auto& pr : uniq) {
                while (hull.size() >= 2) {
                    auto& o = hull[hull.size() - 2];
                    auto& m = hull.back();
                    double cr = (m.first - o.first) * (pr.second - o.second) -
                                (m.second - o.second) * (pr.first - o.first);
                    if (cr <= 1e-15 * (1 + std::fabs(pr.first) + std::fabs(pr.second)))
                        hull.pop_back();
                    else
                        break;
                }
                hull.push_back(pr);
            }
            out.available = true;
            out.domain = make_interval(uniq.front().first, uniq.back().first);
            out.value = [hull](const Vec& q) {
                double qq = q[0];
                if (qq <= hull.front().first) return hull.front().second;
                if (qq >= hull.back().first) return hull.back().second;
                for (size_t k = 0; k + 1 < hull.size(); ++k)
                    if (qq <= hull[k + 1].first) {
                        double w = (qq - hull[k].first) / (hull[k + 1].first - hull[k].first);
                        return (1 - w) * hull[k].second + w * hull[k + 1].second;
                    }
                return hull.back().second;
            };
            return out;
        }
        /* dimension 2: only the domain (drift hull) has a simple closed form */
        std::vector<Vec> drifts;
        for (const auto& pc : H.pieces)
            drifts.push_back(Vec(pc.drift[0].eval(t, x), pc.drift[1].eval(t, x)));
        out.available = false;
        out.domain = make_polytope(2, drifts);
        return out;
    }
    return out; /* quadratic: full-space domain, no bounded closed form */
}

double ProblemSpec::omega_radius() const {
    double r = 0.0;
    for (const auto& v : omega.verts) r = std::max(r, norm(v));
    return r;
}

/* ---- JSON loading ---- */

namespace {

using nlohmann::json;

const json& need(const json& j, const char* key, const std::string& path) {
    auto it = j.find(key);
    if (it == j.end()) throw ConfigError(path + "." + key + ": missing");
    return *it;
}

double num_at(const json& j, const char* key, const std::string& path) {
    const json& v = need(j, key, path);
    if (!v.is_number()) throw ConfigError(path + "." + key + ": expected a number");
    return v.get<double>();
}

double num_or(const json& j, const char* key, double def) {
    auto it = j.find(key);
    return it == j.end() ? def : it->get<double>();
}

int int_at(const json& j, const char* key, const std::string& path) {
    const json& v = need(j, key, path);
    if (!v.is_number_integer()) throw ConfigError(path + "." + key + ": expected an integer");
    return v.get<int>();
}

Expr expr_from(const json& v, const std::string& path) {
    try {
        if (v.is_number()) return Expr::constant(v.get<double>());
        if (v.is_string()) return Expr::parse(v.get<std::string>());
    } catch (const ConfigError& e) {
        throw ConfigError(path + ": " + e.what());
    }
    throw ConfigError(path + ": expected an expression string or number");
}

Expr expr_at(const json& j, const char* key, const std::string& path) {
    return expr_from(need(j, key, path), path + "." + key);
}

Expr expr_or(const json& j, const char* key, const std::string& path) {
    auto it = j.find(key);
    return it == j.end() ? Expr() : expr_from(*it, path + "." + key);
}

} // namespace

ProblemSpec parse_problem(const std::string& json_text) {
    json root;
    try {
        root = json::parse(json_text);
    } catch (const std::exception& e) {
        throw ConfigError(std::string("config: not valid JSON: ") + e.what());
    }
    if (!root.is_object()) throw ConfigError("config: top level must be an object");

    ProblemSpec ps;
    ps.name = root.value("name", std::string("unnamed"));
    ps.seed = (uint64_t)root.value("seed", 12345);

    const json& jh = need(root, "hamiltonian", "config");
    std::string fam = need(jh, "family", "config.hamiltonian").get<std::string>();
    ps.H.n = root.value("state_dim", 1);
    if (ps.H.n < 1 || ps.H.n > 2) throw ConfigError("config.state_dim: must be 1 or 2");

    if (fam == "scaled-eikonal") {
        ps.H.family = HamiltonianFamily::scaled_eikonal;
        ps.H.a = expr_at(jh, "a", "config.hamiltonian");
        ps.H.c = expr_at(jh, "c", "config.hamiltonian");
        const json& jb = need(jh, "b", "config.hamiltonian");
        if (!jb.is_array() || (int)jb.size() != ps.H.n)
            throw ConfigError("config.hamiltonian.b: expected an array of state_dim expressions");
        for (int d = 0; d < ps.H.n; ++d)
            ps.H.b[(size_t)d] = expr_from(jb[(size_t)d], "config.hamiltonian.b[" + std::to_string(d) + "]");
    } else if (fam == "sup-affine") {
        ps.H.family = HamiltonianFamily::sup_affine;
        const json& jp = need(jh, "pieces", "config.hamiltonian");
        if (!jp.is_array() || jp.empty())
            throw ConfigError("config.hamiltonian.pieces: expected a non-empty array");
        for (size_t k = 0; k < jp.size(); ++k) {
            std::string pp = "config.hamiltonian.pieces[" + std::to_string(k) + "]";
            const json& one = jp[k];
            AffinePiece pc;
            const json& jf = need(one, "drift", pp);
            if (!jf.is_array() || (int)jf.size() != ps.H.n)
                throw ConfigError(pp + ".drift: expected an array of state_dim expressions");
            for (int d = 0; d < ps.H.n; ++d)
                pc.drift[(size_t)d] = expr_from(jf[(size_t)d], pp + ".drift[" + std::to_string(d) + "]");
            pc.cost = expr_at(one, "cost", pp);
            ps.H.pieces.push_back(std::move(pc));
        }
    } else if (fam == "quadratic") {
        ps.H.family = HamiltonianFamily::quadratic;
        ps.H.a = expr_at(jh, "a", "config.hamiltonian");
        ps.H.c = expr_at(jh, "c", "config.hamiltonian");
    } else {
        throw ConfigError("config.hamiltonian.family: unknown family \"" + fam +
                          "\" (known: scaled-eikonal, sup-affine, quadratic)");
    }

    if (auto it = root.find("envelopes"); it != root.end()) {
        const json& je = *it;
        ps.H.env_phi_lo = expr_or(je, "phi_lo", "config.envelopes");
        ps.H.env_phi_hi = expr_or(je, "phi_hi", "config.envelopes");
        ps.H.env_psi = expr_or(je, "psi", "config.envelopes");
        ps.H.env_cr = expr_or(je, "x_lipschitz", "config.envelopes");
        ps.H.env_ctilde = expr_or(je, "p_lipschitz", "config.envelopes");
    }

    const json& jd = need(root, "domain", "config");
    if (auto it = jd.find("box"); it != jd.end()) {
        const json& jb = *it;
        if (!jb.is_array() || (int)jb.size() != ps.H.n)
            throw ConfigError("config.domain.box: expected state_dim [lo, hi] pairs");
        std::array<double, 2> lo{}, hi{};
        for (int d = 0; d < ps.H.n; ++d) {
            if (!jb[(size_t)d].is_array() || jb[(size_t)d].size() != 2)
                throw ConfigError("config.domain.box[" + std::to_string(d) + "]: expected [lo, hi]");
            lo[(size_t)d] = jb[(size_t)d][0].get<double>();
            hi[(size_t)d] = jb[(size_t)d][1].get<double>();
            if (!(lo[(size_t)d] < hi[(size_t)d]))
                throw ConfigError("config.domain.box[" + std::to_string(d) + "]: needs lo < hi");
        }
        if (ps.H.n == 1)
            ps.omega = make_interval(lo[0], hi[0]);
        else
            ps.omega = make_polytope(2, {Vec(lo[0], lo[1]), Vec(hi[0], lo[1]), Vec(hi[0], hi[1]),
                                         Vec(lo[0], hi[1])});
    } else if (auto jp = jd.find("polygon"); jp != jd.end()) {
        if (ps.H.n != 2) throw ConfigError("config.domain.polygon: needs state_dim 2");
        std::vector<Vec> vs;
        for (const auto& v : *jp) vs.push_back(Vec(v[0].get<double>(), v[1].get<double>()));
        if (vs.size() < 3) throw ConfigError("config.domain.polygon: needs at least 3 vertices");
        ps.omega = make_polytope(2, vs);
    } else {
        throw ConfigError("config.domain: expected \"box\" or \"polygon\"");
    }

    const json& jt = need(root, "time", "config");
    double T = num_at(jt, "horizon", "config.time");
    int tn = int_at(jt, "nodes", "config.time");
    if (!(T > 0) || tn < 2) throw ConfigError("config.time: needs horizon > 0 and nodes >= 2");
    ps.tgrid = GridAxis{0.0, T, tn};

    const json& jx = need(root, "state_nodes", "config");
    if (!jx.is_array() || (int)jx.size() != ps.H.n)
        throw ConfigError("config.state_nodes: expected state_dim node counts");
    for (int d = 0; d < ps.H.n; ++d) {
        int cnt = jx[(size_t)d].get<int>();
        if (cnt < 3) throw ConfigError("config.state_nodes: each axis needs >= 3 nodes");
        double lo = kInf, hi = -kInf;
        for (const auto& v : ps.omega.verts) {
            lo = std::min(lo, v[d]);
            hi = std::max(hi, v[d]);
        }
        ps.xgrid[(size_t)d] = GridAxis{lo, hi, cnt};
    }

    if (auto it = root.find("controls"); it != root.end()) {
        ps.control_interior = (int)num_or(*it, "interior", ps.control_interior);
        ps.control_boundary = (int)num_or(*it, "boundary", ps.control_boundary);
    }
    if (ps.control_interior < 1 || ps.control_boundary < 0)
        throw ConfigError("config.controls: needs interior >= 1, boundary >= 0");

    if (auto it = root.find("outward_pointing"); it != root.end()) {
        ps.opc.declared = true;
        ps.opc.eta = num_at(*it, "eta", "config.outward_pointing");
        ps.opc.r = num_at(*it, "r", "config.outward_pointing");
        ps.opc.M = num_at(*it, "M", "config.outward_pointing");
        if (!(ps.opc.eta > 0) || !(ps.opc.r > 0) || !(ps.opc.M > 0))
            throw ConfigError("config.outward_pointing: eta, r, M must be positive");
    }

    ps.closed_form_V = expr_or(root, "reference_solution", "config");
    if (auto it = root.find("tail"); it != root.end())
        ps.tail_horizon = num_or(*it, "horizon", ps.tail_horizon);

    /* conjugation grids: explicit, or sized from the empirical p-slope with
     * dual nodes on multiples of 0.005 so unit breakpoints land on nodes */
    double slope = ps.H.slope_bound(0.0, T, ps.xgrid);
    double p_radius = 4.0, q_radius = 0.0;
    int p_nodes = 481, q_nodes = 0;
    if (auto it = root.find("conjugate_grids"); it != root.end()) {
        p_radius = num_or(*it, "p_radius", p_radius);
        p_nodes = (int)num_or(*it, "p_nodes", p_nodes);
        q_radius = num_or(*it, "q_radius", 0.0);
        q_nodes = (int)num_or(*it, "q_nodes", 0);
    }
    if (q_radius <= 0) q_radius = std::max(0.5, std::ceil((1.25 * slope + 0.5) / 0.5) * 0.5);
    if (q_nodes <= 0) {
        double step = 0.005;
        while (2.0 * q_radius / step + 1.0 > 1601.5) step *= 2.0;
        q_nodes = (int)std::lround(2.0 * q_radius / step) + 1;
    }
    if (p_nodes < 9 || q_nodes < 9 || !(p_radius > 0) || !(q_radius > 0))
        throw ConfigError("config.conjugate_grids: degenerate grid sizes");
    for (int d = 0; d < ps.H.n; ++d) {
        ps.pgrid[(size_t)d] = GridAxis{-p_radius, p_radius, p_nodes};
        ps.qgrid[(size_t)d] = GridAxis{-q_radius, q_radius, q_nodes};
    }

    if (ps.H.n == 1) {
        auto check1d = [&](const Expr& e, const char* where) {
            if (!e.empty() && e.uses_x2())
                throw ConfigError(std::string("config: ") + where + " references x2 but state_dim is 1");
        };
        check1d(ps.H.a, "hamiltonian.a");
        check1d(ps.H.c, "hamiltonian.c");
        check1d(ps.H.b[0], "hamiltonian.b");
        for (const auto& pc : ps.H.pieces) {
            check1d(pc.drift[0], "hamiltonian.pieces drift");
            check1d(pc.cost, "hamiltonian.pieces cost");
        }
        check1d(ps.closed_form_V, "reference_solution");
    }
    return ps;
}

ProblemSpec load_problem_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_problem(ss.str());
}

} // namespace hjb
