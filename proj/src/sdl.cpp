#include "dtwin/sdl.hpp"

#include <charconv>
#include <cmath>
#include <numbers>
#include <set>
#include <sstream>

namespace dtwin {

const char* to_string(SignalKind k) { return k == SignalKind::digital ? "digital" : "analog"; }

const char* to_string(Protocol p) {
    switch (p) {
        case Protocol::modbus: return "modbus";
        case Protocol::opcua: return "opcua";
        case Protocol::ros: return "ros";
        case Protocol::mqtt: return "mqtt";
    }
    return "modbus";
}

const char* to_string(ZoneRole r) {
    switch (r) {
        case ZoneRole::pick: return "pick";
        case ZoneRole::place: return "place";
        case ZoneRole::neutral: return "neutral";
    }
    return "neutral";
}

const char* to_string(JointKind k) { return k == JointKind::revolute ? "revolute" : "prismatic"; }

}  // namespace dtwin

namespace dtwin::sdl {
namespace {

enum class Tok { ident, number, string, lbrace, rbrace, end };

struct Token {
    Tok kind = Tok::end;
    std::string text;
    int line = 1;
    int column = 1;
};

struct SyntaxError {
    int line;
    int column;
    std::string message;
};

bool is_ident_start(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_'; }
bool is_ident_char(char c) { return is_ident_start(c) || (c >= '0' && c <= '9'); }
bool is_digit(char c) { return c >= '0' && c <= '9'; }

class Lexer {
public:
    explicit Lexer(std::string_view src) : src_(src) {}

    Token next() {
        skip_trivia();
        Token t;
        t.line = line_;
        t.column = col_;
        if (pos_ >= src_.size()) {
            t.kind = Tok::end;
            return t;
        }
        const char c = src_[pos_];
        if (c == '{' || c == '}') {
            t.kind = c == '{' ? Tok::lbrace : Tok::rbrace;
            t.text = std::string(1, c);
            advance();
            return t;
        }
        if (c == '"') return lex_string(t);
        if (is_ident_start(c)) {
            t.kind = Tok::ident;
            while (pos_ < src_.size() && is_ident_char(src_[pos_])) {
                t.text.push_back(src_[pos_]);
                advance();
            }
            return t;
        }
        if (is_digit(c) || c == '-' || c == '+' || c == '.') return lex_number(t);
        throw SyntaxError{line_, col_, "unexpected character '" + printable(c) + "'"};
    }

    // Position of the last consumed character, for end-of-input diagnostics.
    std::pair<int, int> last_char() const { return {last_line_, last_col_}; }

private:
    static std::string printable(char c) {
        const auto u = static_cast<unsigned char>(c);
        if (u >= 0x20 && u < 0x7f) return std::string(1, c);
        char buf[8];
        std::snprintf(buf, sizeof buf, "\\x%02x", u);
        return buf;
    }

    void advance() {
        last_line_ = line_;
        last_col_ = col_;
        if (src_[pos_] == '\n') {
            ++line_;
            col_ = 1;
        } else {
            ++col_;
        }
        ++pos_;
    }

    void skip_trivia() {
        while (pos_ < src_.size()) {
            const char c = src_[pos_];
            if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
                advance();
            } else if (c == '#') {
                while (pos_ < src_.size() && src_[pos_] != '\n') advance();
            } else {
                break;
            }
        }
    }

    Token lex_string(Token t) {
        t.kind = Tok::string;
        advance();  // opening quote
        while (true) {
            if (pos_ >= src_.size() || src_[pos_] == '\n') throw SyntaxError{t.line, t.column, "unterminated string"};
            const char c = src_[pos_];
            if (c == '"') {
                advance();
                return t;
            }
            if (c == '\\') {
                const int el = line_, ec = col_;
                advance();
                if (pos_ >= src_.size()) throw SyntaxError{t.line, t.column, "unterminated string"};
                const char e = src_[pos_];
                switch (e) {
                    case '"': t.text.push_back('"'); break;
                    case '\\': t.text.push_back('\\'); break;
                    case 'n': t.text.push_back('\n'); break;
                    case 't': t.text.push_back('\t'); break;
                    default: throw SyntaxError{el, ec, "unknown escape sequence"};
                }
                advance();
                continue;
            }
            t.text.push_back(c);
            advance();
        }
    }

    Token lex_number(Token t) {
        t.kind = Tok::number;
        const std::size_t start = pos_;
        auto take_digits = [&] {
            std::size_t n = 0;
            while (pos_ < src_.size() && is_digit(src_[pos_])) {
                advance();
                ++n;
            }
            return n;
        };
        if (src_[pos_] == '-' || src_[pos_] == '+') advance();
        std::size_t digits = take_digits();
        if (pos_ < src_.size() && src_[pos_] == '.') {
            advance();
            digits += take_digits();
        }
        if (digits == 0) throw SyntaxError{t.line, t.column, "malformed number"};
        if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
            advance();
            if (pos_ < src_.size() && (src_[pos_] == '-' || src_[pos_] == '+')) advance();
            if (take_digits() == 0) throw SyntaxError{t.line, t.column, "malformed number exponent"};
        }
        if (pos_ < src_.size() && is_ident_char(src_[pos_])) throw SyntaxError{line_, col_, "malformed number"};
        t.text = std::string(src_.substr(start, pos_ - start));
        return t;
    }

    std::string_view src_;
    std::size_t pos_ = 0;
    int line_ = 1;
    int col_ = 1;
    int last_line_ = 1;
    int last_col_ = 1;
};

class Parser {
public:
    explicit Parser(std::string_view src) : lex_(src) { cur_ = lex_.next(); }

    SdlDocument document() {
        SdlDocument doc;
        doc.loc = loc(cur_);
        keyword("scene");
        keyword("version");
        doc.version = integer();
        expect(Tok::lbrace, "'{'");
        while (cur_.kind != Tok::rbrace) {
            if (cur_.kind == Tok::end) fail_here("expected '}' to close the scene");
            if (is_kw("machine")) doc.declarations.emplace_back(machine());
            else if (is_kw("robot")) doc.declarations.emplace_back(robot());
            else if (is_kw("zone")) doc.declarations.emplace_back(zone());
            else fail_here("expected 'machine', 'robot' or 'zone'");
        }
        bump();
        if (cur_.kind != Tok::end) fail_here("unexpected content after the scene block");
        return doc;
    }

private:
    static SourceLoc loc(const Token& t) { return {t.line, t.column}; }

    [[noreturn]] void fail_here(const std::string& msg) {
        if (cur_.kind == Tok::end) {
            const auto [l, c] = lex_.last_char();
            throw SyntaxError{l, c, msg + ", found end of input"};
        }
        throw SyntaxError{cur_.line, cur_.column, msg + ", found '" + cur_.text + "'"};
    }

    void bump() { cur_ = lex_.next(); }

    bool is_kw(std::string_view kw) const { return cur_.kind == Tok::ident && cur_.text == kw; }

    void keyword(std::string_view kw) {
        if (!is_kw(kw)) fail_here("expected '" + std::string(kw) + "'");
        bump();
    }

    void expect(Tok kind, const char* what) {
        if (cur_.kind != kind) fail_here(std::string("expected ") + what);
        bump();
    }

    std::string ident() {
        if (cur_.kind != Tok::ident) fail_here("expected an identifier");
        std::string s = cur_.text;
        bump();
        return s;
    }

    double number() {
        if (cur_.kind != Tok::number) fail_here("expected a number");
        std::string_view text = cur_.text;
        if (!text.empty() && text.front() == '+') text.remove_prefix(1);
        double v = 0;
        const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
        if (ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(v))
            throw SyntaxError{cur_.line, cur_.column, "number out of range"};
        bump();
        return v;
    }

    long integer() {
        if (cur_.kind != Tok::number) fail_here("expected an integer");
        long v = 0;
        const auto [ptr, ec] = std::from_chars(cur_.text.data(), cur_.text.data() + cur_.text.size(), v);
        if (ec != std::errc() || ptr != cur_.text.data() + cur_.text.size())
            throw SyntaxError{cur_.line, cur_.column, "expected an integer"};
        bump();
        return v;
    }

    Triple vec3() {
        Triple t;
        for (auto& v : t) v = number();
        return t;
    }

    template <typename E>
    E choice(std::initializer_list<std::pair<const char*, E>> options, const char* what) {
        if (cur_.kind == Tok::ident) {
            for (const auto& [name, value] : options) {
                if (cur_.text == name) {
                    bump();
                    return value;
                }
            }
        }
        fail_here(std::string("expected ") + what);
    }

    PoseDecl pose_inline() {
        PoseDecl p;
        keyword("xyz");
        p.xyz = vec3();
        keyword("rpy");
        p.rpy_deg = vec3();
        return p;
    }

    ShapeDecl shape_inline() {
        if (is_kw("box")) {
            bump();
            return BoxDecl{vec3()};
        }
        if (is_kw("sphere")) {
            bump();
            return SphereDecl{number()};
        }
        if (is_kw("cylinder")) {
            bump();
            const double r = number();
            return CylinderDecl{r, number()};
        }
        fail_here("expected 'box', 'sphere' or 'cylinder'");
    }

    SignalDecl signal() {
        SignalDecl s;
        s.loc = loc(cur_);
        keyword("signal");
        s.name = ident();
        s.kind = choice<SignalKind>({{"digital", SignalKind::digital}, {"analog", SignalKind::analog}},
                                    "'digital' or 'analog'");
        keyword("rate");
        s.rate_hz = number();
        keyword("protocol");
        s.protocol = choice<Protocol>(
            {{"modbus", Protocol::modbus}, {"opcua", Protocol::opcua}, {"ros", Protocol::ros}, {"mqtt", Protocol::mqtt}},
            "'modbus', 'opcua', 'ros' or 'mqtt'");
        return s;
    }

    MachineDecl machine() {
        MachineDecl m;
        keyword("machine");
        m.loc = loc(cur_);
        m.id = ident();
        expect(Tok::lbrace, "'{'");
        keyword("pose");
        m.pose = pose_inline();
        keyword("shape");
        m.shape = shape_inline();
        if (is_kw("mesh")) {
            bump();
            if (cur_.kind != Tok::string) fail_here("expected a quoted mesh path");
            m.mesh_ref = cur_.text;
            bump();
        }
        if (is_kw("controller")) {
            bump();
            ControllerDecl c;
            c.loc = loc(cur_);
            c.id = ident();
            expect(Tok::lbrace, "'{'");
            while (is_kw("signal")) c.signals.push_back(signal());
            expect(Tok::rbrace, "'}' or 'signal'");
            m.controller = std::move(c);
        }
        while (is_kw("signal")) m.signals.push_back(signal());
        expect(Tok::rbrace, "'}'");
        return m;
    }

    RobotDecl robot() {
        RobotDecl r;
        keyword("robot");
        r.loc = loc(cur_);
        r.id = ident();
        expect(Tok::lbrace, "'{'");
        keyword("pose");
        r.base_pose = pose_inline();
        if (!is_kw("joint")) fail_here("expected 'joint'");
        while (is_kw("joint")) {
            bump();
            JointDecl j;
            j.loc = loc(cur_);
            j.id = ident();
            j.kind = choice<JointKind>({{"revolute", JointKind::revolute}, {"prismatic", JointKind::prismatic}},
                                       "'revolute' or 'prismatic'");
            keyword("axis");
            j.axis = vec3();
            keyword("origin");
            j.origin = pose_inline();
            keyword("limits");
            j.lower = number();
            j.upper = number();
            keyword("vel");
            j.vel = number();
            keyword("acc");
            j.acc = number();
            keyword("link_shape");
            r.links.push_back(LinkDecl{shape_inline()});
            r.joints.push_back(std::move(j));
        }
        expect(Tok::rbrace, "'}' or 'joint'");
        return r;
    }

    ZoneDecl zone() {
        ZoneDecl z;
        keyword("zone");
        z.loc = loc(cur_);
        z.id = ident();
        keyword("role");
        z.role = choice<ZoneRole>({{"pick", ZoneRole::pick}, {"place", ZoneRole::place}, {"neutral", ZoneRole::neutral}},
                                  "'pick', 'place' or 'neutral'");
        expect(Tok::lbrace, "'{'");
        keyword("pose");
        z.pose = pose_inline();
        keyword("shape");
        z.shape = shape_inline();
        expect(Tok::rbrace, "'}'");
        return z;
    }

    Lexer lex_;
    Token cur_;
};

bool shape_decl_positive(const ShapeDecl& s) { return shape_dimensions_positive(to_shape(s)); }

Diagnostic error_at(const SourceLoc& l, std::string msg) { return {Severity::error, l.line, l.column, std::move(msg)}; }

void check_signal(const SignalDecl& s, std::vector<Diagnostic>& out) {
    if (!(s.rate_hz > 0)) out.push_back(error_at(s.loc, "signal '" + s.name + "' rate must be positive"));
}

std::string fmt_num(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

std::string fmt_triple(const Triple& t) { return fmt_num(t[0]) + " " + fmt_num(t[1]) + " " + fmt_num(t[2]); }

std::string fmt_pose(const PoseDecl& p) { return "xyz " + fmt_triple(p.xyz) + " rpy " + fmt_triple(p.rpy_deg); }

std::string fmt_shape(const ShapeDecl& s) {
    return std::visit(
        [](const auto& v) -> std::string {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, BoxDecl>) return "box " + fmt_triple(v.size);
            else if constexpr (std::is_same_v<T, SphereDecl>) return "sphere " + fmt_num(v.radius);
            else return "cylinder " + fmt_num(v.radius) + " " + fmt_num(v.height);
        },
        s);
}

std::string quote(const std::string& s) {
    std::string out = "\"";
    for (const char c : s) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\t': out += "\\t"; break;
            default: out.push_back(c);
        }
    }
    return out + "\"";
}

std::string fmt_signal(const SignalDecl& s) {
    return "signal " + s.name + " " + to_string(s.kind) + " rate " + fmt_num(s.rate_hz) + " protocol " +
           to_string(s.protocol);
}

constexpr double kDegToRad = std::numbers::pi / 180.0;

}  // namespace

std::string to_string(const Diagnostic& d) {
    return std::to_string(d.line) + ":" + std::to_string(d.column) + ": " +
           (d.severity == Severity::error ? "error: " : "warning: ") + d.message;
}

bool has_errors(const std::vector<Diagnostic>& diags) {
    for (const auto& d : diags) {
        if (d.severity == Severity::error) return true;
    }
    return false;
}

ParseResult parse(std::string_view source, const ValidateOptions& opts) {
    ParseResult result;
    SdlDocument doc;
    try {
        Parser p(source);
        doc = p.document();
    } catch (const SyntaxError& e) {
        result.diagnostics.push_back({Severity::error, e.line, e.column, e.message});
        return result;
    }
    result.diagnostics = validate(doc, opts);
    if (!has_errors(result.diagnostics)) result.document = std::move(doc);
    return result;
}

std::vector<Diagnostic> validate(const SdlDocument& doc, const ValidateOptions& opts) {
    std::vector<Diagnostic> out;
    std::set<std::string> ids;
    auto claim = [&](const std::string& id, const SourceLoc& l) {
        if (!ids.insert(id).second) out.push_back(error_at(l, "duplicate id '" + id + "'"));
    };
    if (doc.version != 1) out.push_back(error_at(doc.loc, "unsupported scene version " + std::to_string(doc.version)));

    int robots = 0;
    for (const auto& decl : doc.declarations) {
        if (const auto* m = std::get_if<MachineDecl>(&decl)) {
            claim(m->id, m->loc);
            if (!shape_decl_positive(m->shape))
                out.push_back(error_at(m->loc, "machine '" + m->id + "' shape dimensions must be positive"));
            if (m->controller) {
                claim(m->controller->id, m->controller->loc);
                for (const auto& s : m->controller->signals) check_signal(s, out);
            }
            for (const auto& s : m->signals) check_signal(s, out);
            const Vec3 c(m->pose.xyz[0], m->pose.xyz[1], m->pose.xyz[2]);
            if (shape_decl_positive(m->shape) &&
                c.norm() - bounding_radius(to_shape(m->shape)) > opts.workspace_radius) {
                out.push_back({Severity::warning, m->loc.line, m->loc.column,
                               "machine '" + m->id + "' lies entirely outside the workspace radius"});
            }
        } else if (const auto* r = std::get_if<RobotDecl>(&decl)) {
            if (++robots == 2) out.push_back(error_at(r->loc, "exactly one robot required, found a second one"));
            claim(r->id, r->loc);
            if (r->joints.size() != r->links.size())
                out.push_back(error_at(r->loc, "robot '" + r->id + "' joint count must equal link count"));
            for (std::size_t i = 0; i < r->joints.size(); ++i) {
                const JointDecl& j = r->joints[i];
                claim(j.id, j.loc);
                if (!(j.lower < j.upper))
                    out.push_back(error_at(j.loc, "joint '" + j.id + "' limits must satisfy lower < upper"));
                if (!(j.vel > 0)) out.push_back(error_at(j.loc, "joint '" + j.id + "' vel limit must be positive"));
                if (!(j.acc > 0)) out.push_back(error_at(j.loc, "joint '" + j.id + "' acc limit must be positive"));
                if (!(Vec3(j.axis[0], j.axis[1], j.axis[2]).norm() > 1e-12))
                    out.push_back(error_at(j.loc, "joint '" + j.id + "' axis must be nonzero"));
                if (i < r->links.size() && !shape_decl_positive(r->links[i].shape))
                    out.push_back(error_at(j.loc, "joint '" + j.id + "' link shape dimensions must be positive"));
            }
        } else if (const auto* z = std::get_if<ZoneDecl>(&decl)) {
            claim(z->id, z->loc);
            if (!shape_decl_positive(z->shape))
                out.push_back(error_at(z->loc, "zone '" + z->id + "' shape dimensions must be positive"));
        }
    }
    if (robots == 0) out.push_back(error_at(doc.loc, "exactly one robot required, found none"));
    return out;
}

std::string serialize(const SdlDocument& doc) {
    std::ostringstream os;
    os << "scene version " << doc.version << " {\n";
    for (const auto& decl : doc.declarations) {
        if (const auto* m = std::get_if<MachineDecl>(&decl)) {
            os << "  machine " << m->id << " {\n";
            os << "    pose " << fmt_pose(m->pose) << "\n";
            os << "    shape " << fmt_shape(m->shape) << "\n";
            if (m->mesh_ref) os << "    mesh " << quote(*m->mesh_ref) << "\n";
            if (m->controller) {
                os << "    controller " << m->controller->id << " {\n";
                for (const auto& s : m->controller->signals) os << "      " << fmt_signal(s) << "\n";
                os << "    }\n";
            }
            for (const auto& s : m->signals) os << "    " << fmt_signal(s) << "\n";
            os << "  }\n";
        } else if (const auto* r = std::get_if<RobotDecl>(&decl)) {
            os << "  robot " << r->id << " {\n";
            os << "    pose " << fmt_pose(r->base_pose) << "\n";
            for (std::size_t i = 0; i < r->joints.size(); ++i) {
                const JointDecl& j = r->joints[i];
                os << "    joint " << j.id << " " << to_string(j.kind) << " axis " << fmt_triple(j.axis) << "\n"
                   << "      origin " << fmt_pose(j.origin) << "\n"
                   << "      limits " << fmt_num(j.lower) << " " << fmt_num(j.upper) << " vel " << fmt_num(j.vel)
                   << " acc " << fmt_num(j.acc) << "\n"
                   << "      link_shape " << fmt_shape(r->links.at(i).shape) << "\n";
            }
            os << "  }\n";
        } else if (const auto* z = std::get_if<ZoneDecl>(&decl)) {
            os << "  zone " << z->id << " role " << to_string(z->role) << " {\n";
            os << "    pose " << fmt_pose(z->pose) << "\n";
            os << "    shape " << fmt_shape(z->shape) << "\n";
            os << "  }\n";
        }
    }
    os << "}\n";
    return os.str();
}

InvalidDocument::InvalidDocument(std::vector<Diagnostic> d)
    : std::runtime_error(d.empty() ? std::string("invalid scene document")
                                   : "invalid scene document: " + to_string(d.front())),
      diagnostics(std::move(d)) {}

Shape to_shape(const ShapeDecl& s) {
    return std::visit(
        [](const auto& v) -> Shape {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, BoxDecl>) return Box{0.5 * Vec3(v.size[0], v.size[1], v.size[2])};
            else if constexpr (std::is_same_v<T, SphereDecl>) return Sphere{v.radius};
            else return Cylinder{v.radius, 0.5 * v.height};
        },
        s);
}

Pose to_pose(const PoseDecl& p) {
    return {Vec3(p.xyz[0], p.xyz[1], p.xyz[2]),
            UnitQuat::from_rpy(p.rpy_deg[0] * kDegToRad, p.rpy_deg[1] * kDegToRad, p.rpy_deg[2] * kDegToRad)};
}

SceneModel to_scene_model(const SdlDocument& doc) {
    auto diags = validate(doc);
    if (has_errors(diags)) throw InvalidDocument(std::move(diags));

    SceneModel model;
    for (const auto& decl : doc.declarations) {
        if (const auto* m = std::get_if<MachineDecl>(&decl)) {
            CollisionObject obj{m->id, to_shape(m->shape), to_pose(m->pose), {{"kind", "machine"}}};
            if (m->mesh_ref) obj.metadata["mesh_ref"] = *m->mesh_ref;
            if (m->controller) {
                obj.metadata["controller"] = m->controller->id;
                for (const auto& s : m->controller->signals)
                    model.signals.push_back({m->id, m->controller->id, s.name, s.kind, s.rate_hz, s.protocol});
            }
            for (const auto& s : m->signals) model.signals.push_back({m->id, "", s.name, s.kind, s.rate_hz, s.protocol});
            model.obstacles.push_back(std::move(obj));
        } else if (const auto* r = std::get_if<RobotDecl>(&decl)) {
            std::vector<Joint> joints;
            std::vector<Shape> shapes;
            for (std::size_t i = 0; i < r->joints.size(); ++i) {
                const JointDecl& jd = r->joints[i];
                Joint j;
                j.name = jd.id;
                j.kind = jd.kind;
                j.axis = Vec3(jd.axis[0], jd.axis[1], jd.axis[2]);
                j.origin = to_pose(jd.origin);
                const double scale = jd.kind == JointKind::revolute ? kDegToRad : 1.0;
                j.lower = jd.lower * scale;
                j.upper = jd.upper * scale;
                j.vel_limit = jd.vel;
                j.acc_limit = jd.acc;
                joints.push_back(std::move(j));
                shapes.push_back(to_shape(r->links[i].shape));
                model.link_ids.push_back(jd.id);
            }
            model.robot_id = r->id;
            model.robot = RobotModel(to_pose(r->base_pose), std::move(joints), std::move(shapes));
        } else if (const auto* z = std::get_if<ZoneDecl>(&decl)) {
            model.zones.push_back(
                {z->id, to_shape(z->shape), to_pose(z->pose), {{"kind", "zone"}, {"role", to_string(z->role)}}});
        }
    }
    return model;
}

}  // namespace dtwin::sdl
