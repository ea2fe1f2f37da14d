"""Quantity-aware late-interaction retrieval.

Thin re-export of the compiled core: quantity parsing, the gated encoder,
MaxSim scoring, and the file-level pipeline (gen_data -> train -> build_index
-> search -> evaluate -> export_embeddings).
"""

try:  # installed wheel: the extension lives inside the package
    from numcolbert._ncb import *  # noqa: F401,F403
    from numcolbert._ncb import __version__, __doc__ as _core_doc  # noqa: F401
except ImportError:  # build tree: the extension sits on PYTHONPATH by itself
    from _ncb import *  # noqa: F401,F403
    from _ncb import __version__  # noqa: F401
