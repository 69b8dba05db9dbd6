from .render import FIGURE_KINDS, FigureSpec, SchemaError, figure_data, render

__all__ = ["FIGURE_KINDS", "FigureSpec", "SchemaError", "figure_data", "render"]
