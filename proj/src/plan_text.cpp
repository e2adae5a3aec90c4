// Copyright 2026-present the tierq authors. All rights reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Plan text format. See docs/plan-format.md for the grammar.

#include <charconv>
#include <set>

#include "json.hpp"
#include "tierq/error.hpp"
#include "tierq/plan.hpp"

namespace tierq {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

std::string quote(std::string_view s) { return nlohmann::json(std::string(s)).dump(); }

std::string literal_text(const Literal& l) {
    if (std::holds_alternative<std::monostate>(l.value)) return "(null " + std::string(type_name(l.type)) + ")";
    switch (l.type) {
    case TypeKind::kInt32: return "(i32 " + std::to_string(std::get<int64_t>(l.value)) + ")";
    case TypeKind::kInt64: return "(i64 " + std::to_string(std::get<int64_t>(l.value)) + ")";
    case TypeKind::kFloat64: return "(f64 " + format_double(std::get<double>(l.value)) + ")";
    case TypeKind::kUtf8: return "(str " + quote(std::get<std::string>(l.value)) + ")";
    default: throw Error(ErrorCode::kValidation, "unprintable literal");
    }
}

std::string list_text(std::string_view head, const std::vector<Expr>& xs) {
    std::string out = "(" + std::string(head);
    for (const auto& x : xs) out += " " + expr_to_text(x);
    return out + ")";
}

} // namespace

std::string expr_to_text(const Expr& e) {
    return std::visit(
            overloaded{
                    [](const ColumnRef& c) { return "(col " + quote(c.name) + ")"; },
                    [](const Literal& l) { return literal_text(l); },
                    [](const ArrayIndex& a) { return "(idx " + quote(a.column) + " " + std::to_string(a.index) + ")"; },
                    [](const Cmp& c) {
                        return "(" + std::string(cmp_symbol(c.op)) + " " + expr_to_text(c.lhs) + " " +
                               expr_to_text(c.rhs) + ")";
                    },
                    [](const Arith& a) {
                        return "(" + std::string(arith_symbol(a.op)) + " " + expr_to_text(a.lhs) + " " +
                               expr_to_text(a.rhs) + ")";
                    },
                    [](const Func& f) { return list_text("call " + quote(func_name(f.fn)), f.args); },
                    [](const And& a) { return list_text("and", a.terms); },
                    [](const Or& o) { return list_text("or", o.terms); },
                    [](const Between& b) {
                        return "(between " + expr_to_text(b.value) + " " + expr_to_text(b.lo) + " " +
                               expr_to_text(b.hi) + ")";
                    },
                    [](const IsNotNull& n) { return "(is-not-null " + expr_to_text(n.value) + ")"; },
            },
            e->v);
}

namespace {

std::string node_text(const PlanNode& node) {
    return std::visit(
            overloaded{
                    [](const ReadNode& r) {
                        std::string out = "(read " + quote(r.table_ref);
                        if (r.with_rowid) out += " rowid";
                        if (r.filter) out += " (filter " + expr_to_text(r.filter) + ")";
                        return out + ")";
                    },
                    [](const FilterNode& f) { return "(filter " + expr_to_text(f.predicate) + ")"; },
                    [](const ProjectNode& p) {
                        std::string out = "(project";
                        for (const auto& item : p.items) out += " (" + quote(item.name) + " " + expr_to_text(item.expr) + ")";
                        return out + ")";
                    },
                    [](const AggregateNode& a) {
                        std::string out = "(aggregate " + std::string(phase_name(a.phase)) + " (group";
                        for (const auto& g : a.groupings) out += " " + quote(g);
                        out += ")";
                        for (const auto& m : a.measures) {
                            out += " (measure " + std::string(agg_name(m.fn)) + " " + quote(m.name);
                            for (const auto& arg : m.args) out += " " + expr_to_text(arg);
                            out += ")";
                        }
                        return out + ")";
                    },
                    [](const SortNode& s) {
                        std::string out = "(sort";
                        for (const auto& k : s.keys) {
                            out += std::string(" (") + (k.ascending ? "asc " : "desc ") + expr_to_text(k.expr) + ")";
                        }
                        return out + ")";
                    },
                    [](const OtherNode& o) { return "(" + std::string(node_kind(PlanNode(o))) + ")"; },
            },
            node);
}

void plan_registry(const Plan& plan, std::set<std::string>& functions, std::set<std::string>& aggregates) {
    std::set<FuncName> fns;
    auto add = [&fns](const Expr& e) { collect_functions(e, fns); };
    for (const auto& node : plan.nodes) {
        std::visit(overloaded{
                           [&](const ReadNode& r) { add(r.filter); },
                           [&](const FilterNode& f) { add(f.predicate); },
                           [&](const ProjectNode& p) {
                               for (const auto& i : p.items) add(i.expr);
                           },
                           [&](const AggregateNode& a) {
                               for (const auto& m : a.measures) {
                                   aggregates.insert(std::string(agg_name(m.fn)));
                                   for (const auto& arg : m.args) add(arg);
                               }
                           },
                           [&](const SortNode& s) {
                               for (const auto& k : s.keys) add(k.expr);
                           },
                           [](const OtherNode&) {},
                   },
                   node);
    }
    for (auto f : fns) functions.insert(std::string(func_name(f)));
}

} // namespace

std::string plan_to_text(const Plan& plan) {
    std::string out = "tierq-plan 1\n";
    std::set<std::string> functions, aggregates;
    plan_registry(plan, functions, aggregates);
    out += "registry\n";
    for (const auto& f : functions) out += "  function " + quote(f) + "\n";
    for (const auto& a : aggregates) out += "  aggregate " + quote(a) + "\n";
    const ReadNode& read = plan.read();
    out += "schema " + quote(read.table_ref) + "\n";
    for (const auto& f : read.base_schema.fields()) {
        out += "  field " + quote(f.name) + " " + std::string(type_name(f.type)) +
               (f.nullable ? " nullable" : " required") + "\n";
    }
    out += "nodes\n";
    for (const auto& node : plan.nodes) out += "  " + node_text(node) + "\n";
    if (!plan.emit_names.empty()) {
        out += "emit";
        for (const auto& n : plan.emit_names) out += " " + quote(n);
        out += "\n";
    }
    for (const auto& [k, v] : plan.annotations) out += "annotation " + quote(k) + " " + quote(v) + "\n";
    out += "end\n";
    return out;
}

// ---- reader --------------------------------------------------------------

namespace {

struct Token {
    enum Kind { kOpen, kClose, kString, kAtom, kEnd } kind = kEnd;
    std::string text;
    size_t line = 1, column = 1;
};

class Lexer {
public:
    explicit Lexer(std::string_view text) : _text(text) {}

    Token next() {
        skip_space();
        Token t;
        t.line = _line;
        t.column = _col;
        if (_pos >= _text.size()) return t;
        char c = _text[_pos];
        if (c == '(' || c == ')') {
            t.kind = c == '(' ? Token::kOpen : Token::kClose;
            advance();
            return t;
        }
        if (c == '"') {
            size_t start = _pos;
            advance();
            while (_pos < _text.size() && _text[_pos] != '"') {
                if (_text[_pos] == '\\') advance();
                advance();
            }
            if (_pos >= _text.size()) fail(t, "unterminated string");
            advance();
            try {
                t.text = nlohmann::json::parse(_text.substr(start, _pos - start)).get<std::string>();
            } catch (const nlohmann::json::exception&) {
                fail(t, "bad string literal");
            }
            t.kind = Token::kString;
            return t;
        }
        while (_pos < _text.size() && !std::isspace(static_cast<unsigned char>(_text[_pos])) && _text[_pos] != '(' &&
               _text[_pos] != ')' && _text[_pos] != '"') {
            t.text.push_back(_text[_pos]);
            advance();
        }
        t.kind = Token::kAtom;
        return t;
    }

    [[noreturn]] static void fail(const Token& at, const std::string& msg) {
        throw Error(ErrorCode::kGrammarError,
                    std::to_string(at.line) + ":" + std::to_string(at.column) + ": " + msg);
    }

private:
    void advance() {
        if (_pos < _text.size() && _text[_pos] == '\n') {
            ++_line;
            _col = 1;
        } else {
            ++_col;
        }
        ++_pos;
    }
    void skip_space() {
        while (_pos < _text.size() && std::isspace(static_cast<unsigned char>(_text[_pos]))) advance();
    }

    std::string_view _text;
    size_t _pos = 0, _line = 1, _col = 1;
};

// Parsed s-expression.
struct SNode {
    Token tok;
    std::vector<SNode> items;
    bool is_list() const { return tok.kind == Token::kOpen; }
    bool is_atom(std::string_view a) const { return tok.kind == Token::kAtom && tok.text == a; }
};

class Reader {
public:
    explicit Reader(std::string_view text) : _lex(text) { _cur = _lex.next(); }

    const Token& peek() const { return _cur; }
    Token take() {
        Token t = _cur;
        _cur = _lex.next();
        return t;
    }

    std::string expect_atom(const char* what) {
        if (_cur.kind != Token::kAtom) Lexer::fail(_cur, std::string("expected ") + what);
        return take().text;
    }
    std::string expect_string(const char* what) {
        if (_cur.kind != Token::kString) Lexer::fail(_cur, std::string("expected quoted ") + what);
        return take().text;
    }
    void expect_keyword(std::string_view kw) {
        if (_cur.kind != Token::kAtom || _cur.text != kw) Lexer::fail(_cur, "expected '" + std::string(kw) + "'");
        take();
    }
    bool at_keyword(std::string_view kw) const { return _cur.kind == Token::kAtom && _cur.text == kw; }

    SNode sexpr() {
        SNode n;
        n.tok = take();
        if (n.tok.kind == Token::kClose) Lexer::fail(n.tok, "unexpected ')'");
        if (n.tok.kind == Token::kEnd) Lexer::fail(n.tok, "unexpected end of input");
        if (n.tok.kind == Token::kOpen) {
            while (_cur.kind != Token::kClose) {
                if (_cur.kind == Token::kEnd) Lexer::fail(_cur, "unbalanced '('");
                n.items.push_back(sexpr());
            }
            take();
        }
        return n;
    }

private:
    Lexer _lex;
    Token _cur;
};

struct Registry {
    std::set<std::string> functions;
    std::set<std::string> aggregates;
};

class PlanBuilder {
public:
    explicit PlanBuilder(const Registry& reg) : _reg(reg) {}

    Expr expr(const SNode& n) {
        if (!n.is_list() || n.items.empty() || n.items[0].tok.kind != Token::kAtom) {
            Lexer::fail(n.tok, "expected expression");
        }
        const std::string& head = n.items[0].tok.text;
        auto arity = [&](size_t k) {
            if (n.items.size() != k + 1) Lexer::fail(n.tok, "'" + head + "' takes " + std::to_string(k) + " operand(s)");
        };
        auto sub = [&](size_t i) { return expr(n.items[i]); };
        auto rest = [&](size_t from) {
            std::vector<Expr> xs;
            for (size_t i = from; i < n.items.size(); ++i) xs.push_back(expr(n.items[i]));
            return xs;
        };
        if (head == "col") {
            arity(1);
            return ex::col(string_at(n, 1));
        }
        if (head == "idx") {
            arity(2);
            return ex::idx(string_at(n, 1), int_at(n, 2));
        }
        if (head == "i64" || head == "i32") {
            arity(1);
            return ex::typed_lit(int_at(n, 1), head == "i64" ? TypeKind::kInt64 : TypeKind::kInt32);
        }
        if (head == "f64") {
            arity(1);
            return ex::lit(double_at(n, 1));
        }
        if (head == "str") {
            arity(1);
            return ex::lit(string_at(n, 1));
        }
        if (head == "null") {
            arity(1);
            auto t = type_from_name(atom_at(n, 1));
            if (!t) Lexer::fail(n.items[1].tok, "unknown type");
            return ex::null_lit(*t);
        }
        for (auto op : {CmpOp::kEq, CmpOp::kNe, CmpOp::kLt, CmpOp::kLe, CmpOp::kGt, CmpOp::kGe}) {
            if (head == cmp_symbol(op)) {
                arity(2);
                return ex::cmp(op, sub(1), sub(2));
            }
        }
        for (auto op : {ArithOp::kAdd, ArithOp::kSub, ArithOp::kMul, ArithOp::kDiv, ArithOp::kMod}) {
            if (head == arith_symbol(op)) {
                arity(2);
                return ex::arith(op, sub(1), sub(2));
            }
        }
        if (head == "call") {
            std::string name = string_at(n, 1);
            auto fn = func_from_name(name);
            if (!fn || !_reg.functions.count(name)) {
                throw Error(ErrorCode::kUnknownFunction, "function '" + name + "' is not declared in the registry");
            }
            return ex::func(*fn, rest(2));
        }
        if (head == "and") return ex::and_(rest(1));
        if (head == "or") return ex::or_(rest(1));
        if (head == "between") {
            arity(3);
            return ex::between(sub(1), sub(2), sub(3));
        }
        if (head == "is-not-null") {
            arity(1);
            return ex::is_not_null(sub(1));
        }
        Lexer::fail(n.items[0].tok, "unknown expression '" + head + "'");
    }

    PlanNode node(const SNode& n, const Schema& base) {
        if (!n.is_list() || n.items.empty() || n.items[0].tok.kind != Token::kAtom) {
            Lexer::fail(n.tok, "expected node");
        }
        const std::string& head = n.items[0].tok.text;
        if (head == "read") {
            ReadNode r;
            r.table_ref = string_at(n, 1);
            r.base_schema = base;
            for (size_t i = 2; i < n.items.size(); ++i) {
                const SNode& item = n.items[i];
                if (item.is_atom("rowid")) {
                    r.with_rowid = true;
                } else if (item.is_list() && item.items.size() == 2 && item.items[0].is_atom("filter")) {
                    r.filter = expr(item.items[1]);
                } else {
                    Lexer::fail(item.tok, "unexpected read option");
                }
            }
            return r;
        }
        if (head == "filter") {
            if (n.items.size() != 2) Lexer::fail(n.tok, "filter takes one predicate");
            return FilterNode{expr(n.items[1])};
        }
        if (head == "project") {
            ProjectNode p;
            for (size_t i = 1; i < n.items.size(); ++i) {
                const SNode& item = n.items[i];
                if (!item.is_list() || item.items.size() != 2 || item.items[0].tok.kind != Token::kString) {
                    Lexer::fail(item.tok, "expected (\"name\" expr)");
                }
                p.items.push_back(ProjectItem{expr(item.items[1]), item.items[0].tok.text});
            }
            return p;
        }
        if (head == "aggregate") {
            AggregateNode a;
            std::string phase = atom_at(n, 1);
            if (phase == "full") {
                a.phase = AggPhase::kFull;
            } else if (phase == "partial") {
                a.phase = AggPhase::kPartial;
            } else if (phase == "final") {
                a.phase = AggPhase::kFinal;
            } else {
                Lexer::fail(n.items[1].tok, "unknown aggregate phase '" + phase + "'");
            }
            for (size_t i = 2; i < n.items.size(); ++i) {
                const SNode& item = n.items[i];
                if (!item.is_list() || item.items.empty()) Lexer::fail(item.tok, "expected (group ...) or (measure ...)");
                if (item.items[0].is_atom("group")) {
                    for (size_t k = 1; k < item.items.size(); ++k) a.groupings.push_back(string_at(item, k));
                } else if (item.items[0].is_atom("measure")) {
                    std::string fn_name = atom_at(item, 1);
                    auto fn = agg_from_name(fn_name);
                    if (!fn || !_reg.aggregates.count(fn_name)) {
                        throw Error(ErrorCode::kUnknownFunction,
                                    "aggregate '" + fn_name + "' is not declared in the registry");
                    }
                    Measure m{*fn, {}, string_at(item, 2)};
                    for (size_t k = 3; k < item.items.size(); ++k) m.args.push_back(expr(item.items[k]));
                    a.measures.push_back(std::move(m));
                } else {
                    Lexer::fail(item.tok, "expected (group ...) or (measure ...)");
                }
            }
            return a;
        }
        if (head == "sort") {
            SortNode s;
            for (size_t i = 1; i < n.items.size(); ++i) {
                const SNode& item = n.items[i];
                if (!item.is_list() || item.items.size() != 2 ||
                    !(item.items[0].is_atom("asc") || item.items[0].is_atom("desc"))) {
                    Lexer::fail(item.tok, "expected (asc expr) or (desc expr)");
                }
                s.keys.push_back(SortKey{expr(item.items[1]), item.items[0].is_atom("asc")});
            }
            return s;
        }
        if (head == "expand") return OtherNode{OtherRelKind::kExpand};
        if (head == "join") return OtherNode{OtherRelKind::kJoin};
        if (head == "set") return OtherNode{OtherRelKind::kSet};
        Lexer::fail(n.items[0].tok, "unknown node '" + head + "'");
    }

private:
    static const SNode& at(const SNode& n, size_t i) {
        if (i >= n.items.size()) Lexer::fail(n.tok, "missing operand");
        return n.items[i];
    }
    static std::string string_at(const SNode& n, size_t i) {
        const SNode& s = at(n, i);
        if (s.tok.kind != Token::kString) Lexer::fail(s.tok, "expected quoted string");
        return s.tok.text;
    }
    static std::string atom_at(const SNode& n, size_t i) {
        const SNode& s = at(n, i);
        if (s.tok.kind != Token::kAtom) Lexer::fail(s.tok, "expected word");
        return s.tok.text;
    }
    static int64_t int_at(const SNode& n, size_t i) {
        std::string a = atom_at(n, i);
        int64_t v;
        auto [p, ec] = std::from_chars(a.data(), a.data() + a.size(), v);
        if (ec != std::errc() || p != a.data() + a.size()) Lexer::fail(at(n, i).tok, "expected integer");
        return v;
    }
    static double double_at(const SNode& n, size_t i) {
        std::string a = atom_at(n, i);
        if (a == "nan" || a == "inf" || a == "-inf") {
            return a == "nan" ? std::numeric_limits<double>::quiet_NaN()
                              : (a == "inf" ? std::numeric_limits<double>::infinity()
                                            : -std::numeric_limits<double>::infinity());
        }
        double v;
        auto [p, ec] = std::from_chars(a.data(), a.data() + a.size(), v);
        if (ec != std::errc() || p != a.data() + a.size()) Lexer::fail(at(n, i).tok, "expected number");
        return v;
    }

    const Registry& _reg;
};

} // namespace

Plan text_to_plan(std::string_view text) {
    Reader r(text);
    r.expect_keyword("tierq-plan");
    Token version = r.peek();
    if (r.expect_atom("version") != "1") Lexer::fail(version, "unsupported plan text version");

    Registry reg;
    r.expect_keyword("registry");
    while (r.at_keyword("function") || r.at_keyword("aggregate")) {
        bool is_fn = r.take().text == "function";
        std::string name = r.expect_string("name");
        bool known = is_fn ? func_from_name(name).has_value() : agg_from_name(name).has_value();
        if (!known) {
            throw Error(ErrorCode::kUnknownFunction,
                        std::string(is_fn ? "function" : "aggregate") + " '" + name + "' has no definition");
        }
        (is_fn ? reg.functions : reg.aggregates).insert(name);
    }

    r.expect_keyword("schema");
    r.expect_string("table reference");
    std::vector<Field> fields;
    while (r.at_keyword("field")) {
        r.take();
        Field f;
        f.name = r.expect_string("field name");
        Token type_tok = r.peek();
        auto type = type_from_name(r.expect_atom("type"));
        if (!type) Lexer::fail(type_tok, "unknown type");
        f.type = *type;
        Token flag_tok = r.peek();
        std::string flag = r.expect_atom("nullable or required");
        if (flag != "nullable" && flag != "required") Lexer::fail(flag_tok, "expected nullable or required");
        f.nullable = flag == "nullable";
        fields.push_back(std::move(f));
    }
    Schema base;
    try {
        base = Schema(std::move(fields));
    } catch (const Error& e) {
        Lexer::fail(r.peek(), e.what());
    }

    Plan plan;
    PlanBuilder builder(reg);
    r.expect_keyword("nodes");
    while (r.peek().kind == Token::kOpen) plan.nodes.push_back(builder.node(r.sexpr(), base));
    if (r.at_keyword("emit")) {
        r.take();
        while (r.peek().kind == Token::kString) plan.emit_names.push_back(r.take().text);
    }
    while (r.at_keyword("annotation")) {
        r.take();
        std::string k = r.expect_string("annotation key");
        std::string v = r.expect_string("annotation value");
        plan.annotations.emplace_back(std::move(k), std::move(v));
    }
    r.expect_keyword("end");
    if (r.peek().kind != Token::kEnd) Lexer::fail(r.peek(), "trailing text after 'end'");
    if (plan.nodes.empty()) Lexer::fail(r.peek(), "plan has no nodes");
    return plan;
}

} // namespace tierq
