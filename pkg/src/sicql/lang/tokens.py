"""Hand-rolled scanner for the pipe-SQL dialect."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum, auto

from sicql.errors import ParseError

KEYWORDS = {
    "FROM", "SET", "EXTEND", "WHERE", "AGGREGATE", "ASSERT", "AS",
    "AND", "OR", "NOT", "IN", "RETRY", "ON", "FAIL",
    "CONTINUE", "IGNORE", "ABORT",
    "GROUNDED", "INCLUDES", "EXCLUDES", "SOUND", "RELEVANT",
    "EXTRACTIVE", "ABSTRACTIVE", "GROUP", "BY",
    "TRUE", "FALSE", "NULL",
    "STRING", "INT", "FLOAT", "BOOL", "DATE", "CURRENT_DATE",
}


class TokType(Enum):
    KEYWORD = auto()
    IDENT = auto()
    INT_LIT = auto()
    FLOAT_LIT = auto()
    STRING = auto()      # '...'
    RAW_STRING = auto()  # r'...'
    PROMPT = auto()      # p'...'
    PIPE = auto()        # |>
    LPAREN = auto()
    RPAREN = auto()
    COMMA = auto()
    OP = auto()          # = == != <> < <= > >= + - * / % || ::
    EOF = auto()


@dataclass(frozen=True)
class Token:
    type: TokType
    value: str
    line: int
    column: int


class Scanner:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0
        self.line = 1
        self.col = 1

    def error(self, msg: str) -> ParseError:
        return ParseError(msg, self.line, self.col)

    def _advance(self, n: int = 1) -> None:
        for _ in range(n):
            if self.pos < len(self.text):
                if self.text[self.pos] == "\n":
                    self.line += 1
                    self.col = 1
                else:
                    self.col += 1
                self.pos += 1

    def _peek(self, offset: int = 0) -> str:
        i = self.pos + offset
        return self.text[i] if i < len(self.text) else ""

    def scan(self) -> list[Token]:
        tokens: list[Token] = []
        while True:
            self._skip_trivia()
            if self.pos >= len(self.text):
                tokens.append(Token(TokType.EOF, "", self.line, self.col))
                return tokens
            tokens.append(self._next_token())

    def _skip_trivia(self) -> None:
        while self.pos < len(self.text):
            ch = self.text[self.pos]
            if ch in " \t\r\n":
                self._advance()
            elif ch == "-" and self._peek(1) == "-":
                while self.pos < len(self.text) and self.text[self.pos] != "\n":
                    self._advance()
            else:
                return

    def _next_token(self) -> Token:
        line, col = self.line, self.col
        ch = self.text[self.pos]

        # String forms, including p'...' and r'...' prefixes.
        if ch == "'":
            return Token(TokType.STRING, self._scan_quoted(escape_doubles=True), line, col)
        low = ch.lower()
        if low in ("p", "r") and self._peek(1) == "'":
            self._advance()
            if low == "p":
                return Token(TokType.PROMPT, self._scan_quoted(escape_doubles=True), line, col)
            # Raw strings get no escape processing at all: they end at the
            # first quote, so a regex cannot contain a literal quote.
            return Token(TokType.RAW_STRING, self._scan_quoted(escape_doubles=False), line, col)

        if ch.isalpha() or ch == "_":
            start = self.pos
            while self.pos < len(self.text) and (self.text[self.pos].isalnum() or self.text[self.pos] == "_"):
                self._advance()
            word = self.text[start:self.pos]
            if word.upper() in KEYWORDS:
                return Token(TokType.KEYWORD, word.upper(), line, col)
            return Token(TokType.IDENT, word, line, col)

        if ch.isdigit():
            start = self.pos
            while self.pos < len(self.text) and self.text[self.pos].isdigit():
                self._advance()
            if self._peek() == "." and self._peek(1).isdigit():
                self._advance()
                while self.pos < len(self.text) and self.text[self.pos].isdigit():
                    self._advance()
                return Token(TokType.FLOAT_LIT, self.text[start:self.pos], line, col)
            return Token(TokType.INT_LIT, self.text[start:self.pos], line, col)

        two = self.text[self.pos:self.pos + 2]
        if two == "|>":
            self._advance(2)
            return Token(TokType.PIPE, "|>", line, col)
        if two in ("==", "!=", "<>", "<=", ">=", "||", "::"):
            self._advance(2)
            return Token(TokType.OP, "<>" if two == "!=" else two, line, col)
        if ch in "=<>+-*/%":
            self._advance()
            return Token(TokType.OP, ch, line, col)
        if ch == "(":
            self._advance()
            return Token(TokType.LPAREN, "(", line, col)
        if ch == ")":
            self._advance()
            return Token(TokType.RPAREN, ")", line, col)
        if ch == ",":
            self._advance()
            return Token(TokType.COMMA, ",", line, col)
        raise self.error(f"unexpected character {ch!r}")

    def _scan_quoted(self, escape_doubles: bool) -> str:
        # Caller positioned on the opening quote.
        assert self.text[self.pos] == "'"
        self._advance()
        parts: list[str] = []
        while True:
            if self.pos >= len(self.text):
                raise self.error("unterminated string literal")
            ch = self.text[self.pos]
            if ch == "'":
                if escape_doubles and self._peek(1) == "'":
                    parts.append("'")
                    self._advance(2)
                    continue
                self._advance()
                return "".join(parts)
            parts.append(ch)
            self._advance()


def scan(text: str) -> list[Token]:
    return Scanner(text).scan()
