"""Published JSON schemas for the service's response bodies."""

_NULLABLE_NUMBER = {"type": ["number", "null"]}

BAYES_SUMMARY_SCHEMA = {
    "type": ["object", "null"],
    "required": ["bf10", "log_bf10", "category"],
    "properties": {
        "bf10": _NULLABLE_NUMBER,
        "log_bf10": _NULLABLE_NUMBER,
        "category": {
            "enum": ["none-or-bare", "substantial", "strong", "decisive"]
        },
    },
}

COVERAGE_SCHEMA = {
    "type": "object",
    "required": ["count", "fraction"],
    "properties": {
        "count": {"type": "integer", "minimum": 0},
        "fraction": {"type": "number", "minimum": 0, "maximum": 1},
    },
}

EXPLANATION_SCHEMA = {
    "type": "object",
    "required": [
        "predicate",
        "influence",
        "strictness",
        "bf10",
        "log_bf10",
        "category",
        "coverage",
        "mean_score_inside",
        "mean_score_outside",
        "trace",
        "strategy",
    ],
    "properties": {
        "predicate": {"type": "string", "minLength": 1},
        "influence": {"type": "number"},
        "strictness": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
        "bf10": _NULLABLE_NUMBER,
        "log_bf10": _NULLABLE_NUMBER,
        "category": {
            "enum": ["none-or-bare", "substantial", "strong", "decisive", None]
        },
        "coverage": COVERAGE_SCHEMA,
        "mean_score_inside": {"type": "number"},
        "mean_score_outside": _NULLABLE_NUMBER,
        "trace": {"type": "array", "items": {"type": "number"}},
        "strategy": {"enum": ["influence", "bayes"]},
    },
}

HISTOGRAM_SCHEMA = {
    "type": "object",
    "required": ["type", "edges", "series"],
    "properties": {
        "type": {"const": "histogram"},
        "edges": {"type": "array", "items": {"type": "number"}, "minItems": 2},
        "series": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["label", "counts"],
                "properties": {
                    "label": {"type": "string"},
                    "counts": {"type": "array", "items": {"type": "integer"}},
                },
            },
        },
    },
}

BAR_SCHEMA = {
    "type": "object",
    "required": ["type", "categories", "series", "highlighted"],
    "properties": {
        "type": {"const": "bar"},
        "categories": {"type": "array", "items": {"type": "string"}},
        "series": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["label", "values"],
                "properties": {
                    "label": {"type": "string"},
                    "values": {"type": "array", "items": {"type": "number"}},
                    "counts": {"type": "array", "items": {"type": "integer"}},
                },
            },
        },
        "highlighted": {"type": "array", "items": {"type": "string"}},
    },
}

EVALUATE_SCHEMA = {
    "type": "object",
    "required": ["predicate", "coverage", "histogram", "bayes", "influence", "structure"],
    "properties": {
        "predicate": {"type": "string"},
        "coverage": COVERAGE_SCHEMA,
        "histogram": HISTOGRAM_SCHEMA,
        "bayes": BAYES_SUMMARY_SCHEMA,
        "influence": _NULLABLE_NUMBER,
        "mean_score_inside": _NULLABLE_NUMBER,
        "mean_score_outside": _NULLABLE_NUMBER,
        "structure": {
            "type": "object",
            "required": ["negated", "terms", "clauses"],
            "properties": {
                "negated": {"type": "boolean"},
                "terms": {"type": "integer", "minimum": 1},
                "clauses": {"type": "array"},
            },
        },
    },
}

ERROR_SCHEMA = {
    "type": "object",
    "required": ["code", "message", "detail"],
    "properties": {
        "code": {"type": "string"},
        "message": {"type": "string"},
    },
}

PREDICATE_RECORD_SCHEMA = {
    "type": "object",
    "required": ["id", "text", "label", "color", "hidden", "source"],
    "properties": {
        "id": {"type": "string"},
        "text": {"type": "string"},
        "label": {"type": "string"},
        "color": {"type": "string"},
        "hidden": {"type": "boolean"},
        "source": {"enum": ["induced", "user"]},
    },
}

RECOMMENDATION_SCHEMA = {
    "type": "object",
    "required": ["attribute", "correlation", "direction", "sentence", "chart"],
    "properties": {
        "attribute": {"type": "string"},
        "correlation": {"type": "number"},
        "direction": {"enum": ["high", "low"]},
        "sentence": {"type": "string"},
        "chart": BAR_SCHEMA,
    },
}
