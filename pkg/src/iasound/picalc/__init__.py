"""Applied-pi calculus: terms, processes, deduction and bounded semantics."""
