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

#include "tierq/sql.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <map>

namespace tierq {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

std::string upper(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return out;
}

std::string lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

// ---- lexer ---------------------------------------------------------------

enum class Tok { kIdent, kQuotedIdent, kInt, kFloat, kString, kSymbol, kEnd };

struct Token {
    Tok kind = Tok::kEnd;
    std::string text;
    size_t line = 1, column = 1;
};

const char* const kReserved[] = {"SELECT", "FROM",    "WHERE", "GROUP", "BY",  "ORDER", "ASC",  "DESC",
                                 "AS",     "AND",     "OR",    "NOT",   "IS",  "NULL",  "BETWEEN"};

// Constructs outside the subset, reported by name.
const char* const kUnsupported[] = {"JOIN",   "UNION",  "INTERSECT", "EXCEPT", "HAVING", "LIMIT",  "OFFSET",
                                    "DISTINCT", "WITH", "INSERT",    "UPDATE", "DELETE", "CREATE", "DROP",
                                    "IN",     "LIKE",   "CASE",      "OVER",   "EXISTS", "ON",     "USING"};

bool is_reserved(std::string_view word) {
    std::string u = upper(word);
    return std::any_of(std::begin(kReserved), std::end(kReserved), [&](const char* k) { return u == k; });
}

std::optional<std::string> unsupported_keyword(std::string_view word) {
    std::string u = upper(word);
    for (const char* k : kUnsupported) {
        if (u == k) return u;
    }
    return std::nullopt;
}

[[noreturn]] void fail_at(ErrorCode code, size_t line, size_t column, const std::string& msg) {
    throw Error(code, "line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + msg);
}

std::vector<Token> lex(std::string_view s) {
    std::vector<Token> out;
    size_t i = 0, line = 1, col = 1;
    auto step = [&](size_t n) {
        for (size_t k = 0; k < n && i < s.size(); ++k, ++i) {
            if (s[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
    };
    while (i < s.size()) {
        char c = s[i];
        if (std::isspace(static_cast<unsigned char>(c))) {
            step(1);
            continue;
        }
        if (c == '-' && i + 1 < s.size() && s[i + 1] == '-') {
            while (i < s.size() && s[i] != '\n') step(1);
            continue;
        }
        Token t;
        t.line = line;
        t.column = col;
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            size_t j = i;
            while (j < s.size() && (std::isalnum(static_cast<unsigned char>(s[j])) || s[j] == '_' || s[j] == '$')) ++j;
            t.kind = Tok::kIdent;
            t.text = std::string(s.substr(i, j - i));
            step(j - i);
        } else if (std::isdigit(static_cast<unsigned char>(c)) ||
                   (c == '.' && i + 1 < s.size() && std::isdigit(static_cast<unsigned char>(s[i + 1])))) {
            size_t j = i;
            bool is_float = false;
            while (j < s.size() && std::isdigit(static_cast<unsigned char>(s[j]))) ++j;
            if (j < s.size() && s[j] == '.') {
                is_float = true;
                ++j;
                while (j < s.size() && std::isdigit(static_cast<unsigned char>(s[j]))) ++j;
            }
            if (j < s.size() && (s[j] == 'e' || s[j] == 'E')) {
                size_t k = j + 1;
                if (k < s.size() && (s[k] == '+' || s[k] == '-')) ++k;
                if (k < s.size() && std::isdigit(static_cast<unsigned char>(s[k]))) {
                    is_float = true;
                    j = k;
                    while (j < s.size() && std::isdigit(static_cast<unsigned char>(s[j]))) ++j;
                }
            }
            t.kind = is_float ? Tok::kFloat : Tok::kInt;
            t.text = std::string(s.substr(i, j - i));
            step(j - i);
        } else if (c == '\'' || c == '"') {
            size_t j = i + 1;
            std::string text;
            while (true) {
                if (j >= s.size()) {
                    fail_at(ErrorCode::kSyntaxError, t.line, t.column, "unterminated quoted text");
                }
                if (s[j] == c) {
                    if (j + 1 < s.size() && s[j + 1] == c) {
                        text.push_back(c);
                        j += 2;
                        continue;
                    }
                    break;
                }
                text.push_back(s[j++]);
            }
            t.kind = c == '\'' ? Tok::kString : Tok::kQuotedIdent;
            t.text = std::move(text);
            step(j + 1 - i);
        } else {
            static const char* const two[] = {"<=", ">=", "<>", "!="};
            std::string sym(1, c);
            if (i + 1 < s.size()) {
                std::string pair(s.substr(i, 2));
                for (const char* p : two) {
                    if (pair == p) sym = pair;
                }
            }
            if (sym.size() == 1 && std::string_view("(),*+-/%<>=[];.").find(c) == std::string_view::npos) {
                fail_at(ErrorCode::kSyntaxError, line, col, std::string("unexpected character '") + c + "'");
            }
            t.kind = Tok::kSymbol;
            t.text = sym;
            step(sym.size());
        }
        out.push_back(std::move(t));
    }
    Token end;
    end.line = line;
    end.column = col;
    out.push_back(end);
    return out;
}

// ---- syntax tree ---------------------------------------------------------

struct Ast;
using AstPtr = std::shared_ptr<Ast>;

struct Ast {
    enum Kind { kColumn, kIndex, kInt, kFloat, kString, kNull, kCmp, kArith, kCall, kAgg, kAnd, kOr, kBetween, kNotNull, kStar };
    Kind kind;
    Token at;
    std::string name; // column / function name
    int64_t ival = 0;
    double fval = 0;
    CmpOp cmp = CmpOp::kEq;
    ArithOp arith = ArithOp::kAdd;
    std::vector<AstPtr> kids;
};

struct SelectItem {
    AstPtr expr;
    std::optional<std::string> alias;
};

struct OrderItem {
    AstPtr expr;
    bool ascending = true;
};

struct Query {
    bool star = false;
    std::vector<SelectItem> select;
    Token from_at;
    std::string from;
    AstPtr where;
    std::vector<Token> group_by;
    std::vector<OrderItem> order_by;
};

class Parser {
public:
    explicit Parser(std::vector<Token> toks) : _t(std::move(toks)) {}

    Query query() {
        Query q;
        expect_kw("SELECT");
        if (at_sym("*")) {
            take();
            q.star = true;
        } else {
            if (at_kw("FROM")) syntax("expected a select list");
            do {
                SelectItem item;
                item.expr = expr();
                if (at_kw("AS")) {
                    take();
                    item.alias = ident("alias");
                } else if (peek().kind == Tok::kQuotedIdent || (peek().kind == Tok::kIdent && !is_reserved(peek().text))) {
                    item.alias = ident("alias");
                }
                q.select.push_back(std::move(item));
            } while (accept_sym(","));
        }
        expect_kw("FROM");
        if (peek().kind == Tok::kSymbol && peek().text == "(") {
            unsupported(peek(), "subquery");
        }
        q.from_at = peek();
        q.from = ident("table name");
        if (at_sym(",")) unsupported(peek(), "JOIN");
        if (at_kw("WHERE")) {
            take();
            q.where = expr();
        }
        if (at_kw("GROUP")) {
            take();
            expect_kw("BY");
            do {
                Token t = peek();
                t.text = ident("grouping column");
                if (at_sym("(") || at_sym("[")) syntax("GROUP BY accepts column names only");
                q.group_by.push_back(t);
            } while (accept_sym(","));
        }
        if (at_kw("ORDER")) {
            take();
            expect_kw("BY");
            do {
                OrderItem o;
                o.expr = expr();
                if (at_kw("ASC") || at_kw("DESC")) o.ascending = upper(take().text) == "ASC";
                q.order_by.push_back(std::move(o));
            } while (accept_sym(","));
        }
        accept_sym(";");
        if (peek().kind != Tok::kEnd) syntax("expected end of statement");
        return q;
    }

private:
    const Token& peek(size_t ahead = 0) const { return _t[std::min(_pos + ahead, _t.size() - 1)]; }
    Token take() {
        Token t = peek();
        if (_pos < _t.size() - 1) ++_pos;
        return t;
    }

    bool at_kw(const char* kw) const { return peek().kind == Tok::kIdent && upper(peek().text) == kw; }
    bool at_sym(const char* s) const { return peek().kind == Tok::kSymbol && peek().text == s; }
    bool accept_sym(const char* s) {
        if (!at_sym(s)) return false;
        take();
        return true;
    }

    [[noreturn]] void syntax(const std::string& expected) const {
        const Token& t = peek();
        if (t.kind == Tok::kIdent) {
            if (auto u = unsupported_keyword(t.text)) unsupported(t, *u);
        }
        std::string found = t.kind == Tok::kEnd ? "end of input" : "'" + t.text + "'";
        fail_at(ErrorCode::kSyntaxError, t.line, t.column, expected + ", found " + found);
    }
    [[noreturn]] static void unsupported(const Token& t, const std::string& what) {
        fail_at(ErrorCode::kUnsupportedFeature, t.line, t.column, what + " is not supported");
    }

    void expect_kw(const char* kw) {
        if (!at_kw(kw)) syntax(std::string("expected ") + kw);
        take();
    }
    void expect_sym(const char* s) {
        if (!at_sym(s)) syntax(std::string("expected '") + s + "'");
        take();
    }
    std::string ident(const char* what) {
        const Token& t = peek();
        if (t.kind == Tok::kQuotedIdent) return take().text;
        if (t.kind != Tok::kIdent || is_reserved(t.text)) syntax(std::string("expected ") + what);
        if (auto u = unsupported_keyword(t.text)) unsupported(t, *u);
        return take().text;
    }

    AstPtr node(Ast::Kind k, const Token& at) {
        auto a = std::make_shared<Ast>();
        a->kind = k;
        a->at = at;
        return a;
    }

    AstPtr expr() { return or_expr(); }

    AstPtr or_expr() {
        AstPtr lhs = and_expr();
        if (!at_kw("OR")) return lhs;
        AstPtr n = node(Ast::kOr, lhs->at);
        n->kids.push_back(lhs);
        while (at_kw("OR")) {
            take();
            n->kids.push_back(and_expr());
        }
        return n;
    }

    AstPtr and_expr() {
        AstPtr lhs = predicate();
        if (!at_kw("AND")) return lhs;
        AstPtr n = node(Ast::kAnd, lhs->at);
        n->kids.push_back(lhs);
        while (at_kw("AND")) {
            take();
            n->kids.push_back(predicate());
        }
        return n;
    }

    AstPtr predicate() {
        if (at_kw("NOT")) unsupported(peek(), "NOT");
        AstPtr lhs = additive();
        static const std::pair<const char*, CmpOp> ops[] = {{"=", CmpOp::kEq},  {"!=", CmpOp::kNe}, {"<>", CmpOp::kNe},
                                                            {"<", CmpOp::kLt},  {"<=", CmpOp::kLe}, {">", CmpOp::kGt},
                                                            {">=", CmpOp::kGe}};
        for (const auto& [sym, op] : ops) {
            if (at_sym(sym)) {
                Token at = take();
                AstPtr n = node(Ast::kCmp, at);
                n->cmp = op;
                n->kids = {lhs, additive()};
                return n;
            }
        }
        if (at_kw("BETWEEN")) {
            Token at = take();
            AstPtr n = node(Ast::kBetween, at);
            AstPtr lo = additive();
            expect_kw("AND");
            n->kids = {lhs, lo, additive()};
            return n;
        }
        if (at_kw("IS")) {
            Token at = take();
            if (!at_kw("NOT")) unsupported(at, "IS NULL");
            take();
            expect_kw("NULL");
            AstPtr n = node(Ast::kNotNull, at);
            n->kids = {lhs};
            return n;
        }
        if (at_kw("NOT")) unsupported(peek(), "NOT");
        return lhs;
    }

    AstPtr additive() {
        AstPtr lhs = multiplicative();
        while (at_sym("+") || at_sym("-")) {
            Token at = take();
            AstPtr n = node(Ast::kArith, at);
            n->arith = at.text == "+" ? ArithOp::kAdd : ArithOp::kSub;
            n->kids = {lhs, multiplicative()};
            lhs = n;
        }
        return lhs;
    }

    AstPtr multiplicative() {
        AstPtr lhs = unary();
        while (at_sym("*") || at_sym("/") || at_sym("%")) {
            Token at = take();
            AstPtr n = node(Ast::kArith, at);
            n->arith = at.text == "*" ? ArithOp::kMul : (at.text == "/" ? ArithOp::kDiv : ArithOp::kMod);
            n->kids = {lhs, unary()};
            lhs = n;
        }
        return lhs;
    }

    AstPtr unary() {
        if (!at_sym("-")) return primary();
        Token at = take();
        if (peek().kind == Tok::kInt || peek().kind == Tok::kFloat) {
            AstPtr lit = primary();
            lit->at = at;
            lit->ival = -lit->ival;
            lit->fval = -lit->fval;
            return lit;
        }
        AstPtr n = node(Ast::kArith, at);
        n->arith = ArithOp::kSub;
        AstPtr zero = node(Ast::kInt, at);
        n->kids = {zero, unary()};
        return n;
    }

    AstPtr primary() {
        const Token& t = peek();
        switch (t.kind) {
        case Tok::kInt: {
            AstPtr n = node(Ast::kInt, t);
            auto [p, ec] = std::from_chars(t.text.data(), t.text.data() + t.text.size(), n->ival);
            if (ec != std::errc()) {
                fail_at(ErrorCode::kSyntaxError, t.line, t.column, "integer literal out of range");
            }
            take();
            return n;
        }
        case Tok::kFloat: {
            AstPtr n = node(Ast::kFloat, t);
            std::from_chars(t.text.data(), t.text.data() + t.text.size(), n->fval);
            take();
            return n;
        }
        case Tok::kString: {
            AstPtr n = node(Ast::kString, t);
            n->name = t.text;
            take();
            return n;
        }
        case Tok::kQuotedIdent: return column_or_index(take());
        case Tok::kIdent: break;
        case Tok::kSymbol:
            if (t.text == "(") {
                take();
                if (at_kw("SELECT")) unsupported(peek(), "subquery");
                AstPtr inner = expr();
                expect_sym(")");
                return inner;
            }
            syntax("expected an expression");
        case Tok::kEnd: syntax("expected an expression");
        }
        if (upper(t.text) == "NULL") return node(Ast::kNull, take());
        if (is_reserved(t.text)) syntax("expected an expression");
        if (auto u = unsupported_keyword(t.text)) unsupported(t, *u);
        Token name = take();
        if (!at_sym("(")) return column_or_index(name);
        take();
        std::string fn = lower(name.text);
        if (agg_from_name(fn)) {
            AstPtr n = node(Ast::kAgg, name);
            n->name = fn;
            if (at_kw("DISTINCT")) unsupported(peek(), "DISTINCT");
            if (at_sym("*")) {
                Token star = take();
                if (fn != "count") fail_at(ErrorCode::kSyntaxError, star.line, star.column, "'*' is only valid in count(*)");
            } else if (!at_sym(")")) {
                n->kids.push_back(expr());
            }
            expect_sym(")");
            if (n->kids.empty() && fn != "count") {
                fail_at(ErrorCode::kSyntaxError, name.line, name.column, fn + " takes one argument");
            }
            return n;
        }
        AstPtr n = node(Ast::kCall, name);
        n->name = fn;
        if (!at_sym(")")) {
            do {
                n->kids.push_back(expr());
            } while (accept_sym(","));
        }
        expect_sym(")");
        return n;
    }

    AstPtr column_or_index(const Token& name) {
        AstPtr n = node(Ast::kColumn, name);
        n->name = name.text;
        if (!at_sym("[")) return n;
        take();
        const Token& i = peek();
        if (i.kind != Tok::kInt) syntax("expected an integer array index");
        n->kind = Ast::kIndex;
        std::from_chars(i.text.data(), i.text.data() + i.text.size(), n->ival);
        take();
        expect_sym("]");
        return n;
    }

    std::vector<Token> _t;
    size_t _pos = 0;
};

// ---- plan construction ---------------------------------------------------

[[noreturn]] void semantic(const Token& at, const std::string& msg, ErrorCode code = ErrorCode::kValidation) {
    fail_at(code, at.line, at.column, msg);
}

class Binder {
public:
    Binder(const Query& q, const Schema& schema) : _q(q), _schema(schema) {}

    Plan bind() {
        ReadNode read{_q.from, _schema, false, {}};
        bool has_rowid = _schema.index_of("rowid").has_value();
        _rowid_virtual = !has_rowid;

        Plan plan;
        Expr where;
        if (_q.where) where = scalar(*_q.where, Ctx::kWhere);

        bool grouped = !_q.group_by.empty();
        for (const auto& g : _q.group_by) _groupings.push_back(resolve(g));

        // Select list. Aggregate calls become measures referenced by name.
        std::vector<ProjectItem> items;
        if (!_q.star) {
            for (size_t i = 0; i < _q.select.size(); ++i) {
                const SelectItem& s = _q.select[i];
                std::string name;
                if (s.alias) {
                    name = *s.alias;
                } else if (s.expr->kind == Ast::kColumn) {
                    name = resolve(s.expr->at, s.expr->name);
                } else {
                    name = "_col" + std::to_string(i + 1);
                }
                std::optional<std::string> measure_name;
                if (s.expr->kind == Ast::kAgg) measure_name = name;
                Expr e = scalar(*s.expr, Ctx::kSelect, measure_name);
                items.push_back(ProjectItem{e, name});
            }
        }
        bool aggregated = grouped || !_measures.empty();
        if (_q.star && aggregated) semantic(_q.from_at, "SELECT * cannot be combined with GROUP BY");

        if (aggregated) {
            for (size_t i = 0; i < items.size(); ++i) check_grouped(items[i].expr, *_q.select[i].expr);
        }

        // ORDER BY resolves against select outputs first.
        std::vector<SortKey> post, pre;
        bool all_post = true;
        for (const auto& o : _q.order_by) {
            std::optional<Expr> by_output;
            if (!_q.star && o.expr->kind == Ast::kColumn) {
                for (const auto& it : items) {
                    if (it.name == o.expr->name) by_output = ex::col(it.name);
                }
                if (!by_output) {
                    std::optional<std::string> ci;
                    size_t hits = 0;
                    for (const auto& it : items) {
                        if (lower(it.name) == lower(o.expr->name)) {
                            ci = it.name;
                            ++hits;
                        }
                    }
                    // Case-insensitive match on an output only when no input column matches exactly.
                    if (hits == 1 && !exact_input(o.expr->name)) by_output = ex::col(*ci);
                }
            }
            Expr pre_expr;
            if (!by_output) {
                pre_expr = scalar(*o.expr, Ctx::kOrder);
                if (aggregated) check_grouped(pre_expr, *o.expr);
                for (const auto& it : items) {
                    if (it.expr == pre_expr) by_output = ex::col(it.name);
                }
            }
            if (by_output) {
                post.push_back(SortKey{*by_output, o.ascending});
                std::string n = std::get<ColumnRef>((*by_output)->v).name;
                for (const auto& it : items) {
                    if (it.name == n) pre.push_back(SortKey{it.expr, o.ascending});
                }
            } else {
                all_post = false;
                pre.push_back(SortKey{pre_expr, o.ascending});
                post.push_back(SortKey{});
            }
        }

        read.with_rowid = _rowid_virtual && _uses_rowid;
        plan.nodes.push_back(read);
        if (where) plan.nodes.push_back(FilterNode{where});
        if (aggregated) plan.nodes.push_back(AggregateNode{_groupings, _measures, AggPhase::kFull});
        bool has_project = !_q.star;
        if (!_q.order_by.empty() && (!all_post || !has_project)) plan.nodes.push_back(SortNode{pre});
        if (has_project) plan.nodes.push_back(ProjectNode{items});
        if (!_q.order_by.empty() && all_post && has_project) plan.nodes.push_back(SortNode{post});

        validate_or_throw(plan);
        return plan;
    }

private:
    enum class Ctx { kWhere, kSelect, kOrder, kMeasureArg };

    bool exact_input(const std::string& name) const {
        return _schema.index_of(name).has_value() || (_rowid_virtual && name == "rowid");
    }

    std::string resolve(const Token& at) { return resolve(at, at.text); }

    // Exact match first, then a unique case-insensitive match.
    std::string resolve(const Token& at, const std::string& name) {
        if (exact_input(name)) {
            if (name == "rowid" && _rowid_virtual) _uses_rowid = true;
            return name;
        }
        std::vector<std::string> hits;
        for (const auto& f : _schema.fields()) {
            if (lower(f.name) == lower(name)) hits.push_back(f.name);
        }
        if (_rowid_virtual && lower(name) == "rowid") hits.push_back("rowid");
        if (hits.size() == 1) {
            if (hits[0] == "rowid" && _rowid_virtual) _uses_rowid = true;
            return hits[0];
        }
        if (hits.size() > 1) semantic(at, "column reference '" + name + "' is ambiguous");
        semantic(at, "unknown column '" + name + "'");
    }

    Expr scalar(const Ast& a, Ctx ctx, std::optional<std::string> measure_name = {}) {
        auto kid = [&](size_t i) { return scalar(*a.kids[i], ctx); };
        switch (a.kind) {
        case Ast::kColumn: return ex::col(resolve(a.at, a.name));
        case Ast::kIndex: {
            if (a.ival < 1) semantic(a.at, "array index must be 1 or greater");
            return ex::idx(resolve(a.at, a.name), a.ival);
        }
        case Ast::kInt: return ex::lit(a.ival);
        case Ast::kFloat: return ex::lit(a.fval);
        case Ast::kString: return ex::lit(a.name);
        case Ast::kNull: return ex::null_lit(TypeKind::kInt64);
        case Ast::kCmp: return ex::cmp(a.cmp, kid(0), kid(1));
        case Ast::kArith: return ex::arith(a.arith, kid(0), kid(1));
        case Ast::kBetween: return ex::between(kid(0), kid(1), kid(2));
        case Ast::kNotNull: return ex::is_not_null(kid(0));
        case Ast::kAnd:
        case Ast::kOr: {
            std::vector<Expr> terms;
            for (size_t i = 0; i < a.kids.size(); ++i) {
                Expr t = kid(i);
                // Nested conjunctions (or disjunctions) flatten into one list.
                if (a.kind == Ast::kAnd && std::holds_alternative<And>(t->v)) {
                    for (const auto& x : std::get<And>(t->v).terms) terms.push_back(x);
                } else if (a.kind == Ast::kOr && std::holds_alternative<Or>(t->v)) {
                    for (const auto& x : std::get<Or>(t->v).terms) terms.push_back(x);
                } else {
                    terms.push_back(t);
                }
            }
            return a.kind == Ast::kAnd ? ex::and_(terms) : ex::or_(terms);
        }
        case Ast::kCall: {
            auto fn = func_from_name(a.name);
            if (!fn) semantic(a.at, "unknown function '" + a.name + "'", ErrorCode::kUnknownFunction);
            if (a.kids.size() != 1) semantic(a.at, a.name + " takes one argument");
            return ex::func(*fn, {kid(0)});
        }
        case Ast::kAgg: {
            if (ctx == Ctx::kWhere) semantic(a.at, "aggregate " + a.name + " is not allowed in WHERE");
            if (ctx == Ctx::kMeasureArg) semantic(a.at, "nested aggregate " + a.name);
            Measure m{*agg_from_name(a.name), {}, ""};
            for (const auto& k : a.kids) m.args.push_back(scalar(*k, Ctx::kMeasureArg));
            return ex::col(add_measure(std::move(m), measure_name));
        }
        case Ast::kStar: break;
        }
        semantic(a.at, "unsupported expression");
    }

    // Equal aggregate calls share one measure.
    std::string add_measure(Measure m, const std::optional<std::string>& wanted) {
        for (const auto& existing : _measures) {
            if (existing.fn == m.fn && existing.args == m.args) return existing.name;
        }
        auto taken = [&](const std::string& n) {
            if (std::find(_groupings.begin(), _groupings.end(), n) != _groupings.end()) return true;
            return std::any_of(_measures.begin(), _measures.end(), [&](const Measure& x) { return x.name == n; });
        };
        std::string name;
        if (wanted && !taken(*wanted)) {
            name = *wanted;
        } else {
            size_t k = _measures.size() + 1;
            do {
                name = "_agg" + std::to_string(k++);
            } while (taken(name));
        }
        m.name = name;
        _measures.push_back(std::move(m));
        return name;
    }

    bool is_measure(const std::string& n) const {
        return std::any_of(_measures.begin(), _measures.end(), [&](const Measure& m) { return m.name == n; });
    }

    void check_grouped(const Expr& e, const Ast& at) {
        std::set<std::string> cols;
        collect_columns(e, cols);
        for (const auto& c : cols) {
            if (is_measure(c)) continue;
            if (std::find(_groupings.begin(), _groupings.end(), c) == _groupings.end()) {
                semantic(at.at, "column '" + c + "' must appear in GROUP BY or inside an aggregate");
            }
        }
    }

    const Query& _q;
    const Schema& _schema;
    bool _rowid_virtual = true;
    bool _uses_rowid = false;
    std::vector<std::string> _groupings;
    std::vector<Measure> _measures;
};

Query parse_query(std::string_view sql) {
    auto toks = lex(sql);
    for (const auto& t : toks) {
        if (t.kind == Tok::kIdent) {
            std::string u = upper(t.text);
            if (u == "JOIN" || u == "UNION" || u == "INTERSECT" || u == "EXCEPT") {
                fail_at(ErrorCode::kUnsupportedFeature, t.line, t.column, u + " is not supported");
            }
        }
    }
    return Parser(std::move(toks)).query();
}

SqlDiagnostic to_diagnostic(const Error& e) {
    SqlDiagnostic d;
    d.code = e.code();
    std::string msg = std::string(e.what()).substr(error_code_name(e.code()).size() + 2);
    size_t line = 0, col = 0;
    if (std::sscanf(msg.c_str(), "line %zu, column %zu:", &line, &col) == 2) {
        d.line = line;
        d.column = col;
    }
    d.message = msg;
    return d;
}

} // namespace

Plan parse_sql(std::string_view sql, const Schema& table_schema) {
    Query q = parse_query(sql);
    return Binder(q, table_schema).bind();
}

std::string sql_table_name(std::string_view sql) { return parse_query(sql).from; }

std::vector<SqlDiagnostic> parse_errors(std::string_view sql, const std::optional<Schema>& table_schema) {
    std::vector<SqlDiagnostic> out;
    // Every construct outside the subset is reported, not only the first.
    try {
        for (const auto& t : lex(sql)) {
            if (t.kind != Tok::kIdent) continue;
            if (auto u = unsupported_keyword(t.text)) {
                if (*u == "IN" || *u == "ON" || *u == "USING") continue; // only meaningful in context
                SqlDiagnostic d;
                d.code = ErrorCode::kUnsupportedFeature;
                d.line = t.line;
                d.column = t.column;
                d.message = *u;
                out.push_back(std::move(d));
            }
        }
    } catch (const Error& e) {
        out.push_back(to_diagnostic(e));
        return out;
    }
    if (!out.empty()) return out;
    try {
        Query q = Parser(lex(sql)).query();
        if (table_schema) Binder(q, *table_schema).bind();
    } catch (const Error& e) {
        out.push_back(to_diagnostic(e));
    }
    return out;
}

// ---- printer -------------------------------------------------------------

namespace {

std::string sql_ident(const std::string& name) {
    bool plain = !name.empty() && (std::isalpha(static_cast<unsigned char>(name[0])) || name[0] == '_') &&
                 !is_reserved(name) && !unsupported_keyword(name) && !agg_from_name(lower(name)) &&
                 !func_from_name(lower(name));
    for (char c : name) {
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '$')) plain = false;
    }
    if (plain) return name;
    std::string out = "\"";
    for (char c : name) {
        out += c;
        if (c == '"') out += '"';
    }
    return out + "\"";
}

std::string sql_literal(const Literal& l) {
    if (std::holds_alternative<std::monostate>(l.value)) return "NULL";
    if (const auto* i = std::get_if<int64_t>(&l.value)) return std::to_string(*i);
    if (const auto* d = std::get_if<double>(&l.value)) {
        std::string s = format_double(*d);
        if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
        return s;
    }
    if (const auto* s = std::get_if<std::string>(&l.value)) {
        std::string out = "'";
        for (char c : *s) {
            out += c;
            if (c == '\'') out += '\'';
        }
        return out + "'";
    }
    throw Error(ErrorCode::kInvalidArgument, "list literal has no SQL form");
}

std::string sql_expr(const Expr& e, const std::map<std::string, std::string>& measures);

std::string join_terms(const std::vector<Expr>& xs, const char* op, const std::map<std::string, std::string>& m) {
    std::string out = "(";
    for (size_t i = 0; i < xs.size(); ++i) out += (i ? op : "") + sql_expr(xs[i], m);
    return out + ")";
}

std::string sql_expr(const Expr& e, const std::map<std::string, std::string>& measures) {
    auto sub = [&](const Expr& x) { return sql_expr(x, measures); };
    return std::visit(
            overloaded{
                    [&](const ColumnRef& c) {
                        auto it = measures.find(c.name);
                        return it != measures.end() ? it->second : sql_ident(c.name);
                    },
                    [](const Literal& l) { return sql_literal(l); },
                    [](const ArrayIndex& a) { return sql_ident(a.column) + "[" + std::to_string(a.index) + "]"; },
                    [&](const Cmp& c) {
                        return "(" + sub(c.lhs) + " " + std::string(cmp_symbol(c.op)) + " " + sub(c.rhs) + ")";
                    },
                    [&](const Arith& a) {
                        return "(" + sub(a.lhs) + " " + std::string(arith_symbol(a.op)) + " " + sub(a.rhs) + ")";
                    },
                    [&](const Func& f) { return std::string(func_name(f.fn)) + join_terms(f.args, ", ", measures); },
                    [&](const And& a) { return join_terms(a.terms, " AND ", measures); },
                    [&](const Or& o) { return join_terms(o.terms, " OR ", measures); },
                    [&](const Between& b) {
                        return "(" + sub(b.value) + " BETWEEN " + sub(b.lo) + " AND " + sub(b.hi) + ")";
                    },
                    [&](const IsNotNull& n) { return "(" + sub(n.value) + " IS NOT NULL)"; },
            },
            e->v);
}

} // namespace

std::string emit_sql(const Plan& plan) {
    const ReadNode* read = nullptr;
    const FilterNode* filter = nullptr;
    const AggregateNode* agg = nullptr;
    const ProjectNode* project = nullptr;
    const SortNode* sort = nullptr;
    int stage = 0;
    auto bad = [] { throw Error(ErrorCode::kInvalidArgument, "plan is not in canonical SELECT form"); };
    for (const auto& node : plan.nodes) {
        std::visit(overloaded{
                           [&](const ReadNode& r) {
                               if (stage != 0 || r.filter) bad();
                               read = &r;
                               stage = 1;
                           },
                           [&](const FilterNode& f) {
                               if (stage != 1) bad();
                               filter = &f;
                               stage = 2;
                           },
                           [&](const AggregateNode& a) {
                               if (stage < 1 || stage > 2 || a.phase != AggPhase::kFull) bad();
                               agg = &a;
                               stage = 3;
                           },
                           [&](const ProjectNode& p) {
                               if (stage < 1 || stage > 4) bad();
                               project = &p;
                               stage = 5;
                           },
                           [&](const SortNode& s) {
                               if (stage < 1 || sort) bad();
                               sort = &s;
                               stage = stage == 5 ? 6 : 4;
                           },
                           [&](const OtherNode&) { bad(); },
                   },
                   node);
    }
    if (!read || (agg && !project) || !plan.emit_names.empty()) bad();

    std::map<std::string, std::string> measures;
    if (agg) {
        for (const auto& m : agg->measures) {
            std::string call = std::string(agg_name(m.fn)) + "(";
            call += m.args.empty() ? "*" : sql_expr(m.args[0], {});
            measures[m.name] = call + ")";
        }
    }

    std::string sql = "SELECT ";
    if (project) {
        for (size_t i = 0; i < project->items.size(); ++i) {
            const auto& it = project->items[i];
            sql += (i ? ", " : "") + sql_expr(it.expr, measures) + " AS " + sql_ident(it.name);
        }
    } else {
        sql += "*";
    }
    sql += " FROM " + sql_ident(read->table_ref);
    if (filter) sql += " WHERE " + sql_expr(filter->predicate, {});
    if (agg && !agg->groupings.empty()) {
        sql += " GROUP BY ";
        for (size_t i = 0; i < agg->groupings.size(); ++i) sql += (i ? ", " : "") + sql_ident(agg->groupings[i]);
    }
    if (sort) {
        // Keys after the Project name its outputs; keys before it are input expressions.
        bool after_project = stage == 6;
        sql += " ORDER BY ";
        for (size_t i = 0; i < sort->keys.size(); ++i) {
            const auto& k = sort->keys[i];
            sql += (i ? ", " : "") + sql_expr(k.expr, after_project ? std::map<std::string, std::string>{} : measures);
            sql += k.ascending ? " ASC" : " DESC";
        }
    }
    return sql;
}

} // namespace tierq
