# flake8: noqa
from .document import Document, Value, parse_document, render_document
from .expression import Expression, coordinate_names, parse_expression
