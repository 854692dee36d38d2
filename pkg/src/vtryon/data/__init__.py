"""Synthetic paired try-on corpus: spec types, renderer, generator, I/O."""

from .generate import (gen_dataset, gen_sample, sample_figure_spec,
                       sample_garment_spec, split_roles, unpaired_garment_map)
from .io import Manifest, ManifestEntry, dataset_digest, load_sample, save_sample
from .render import render_person, render_template
from .specs import (AGNOSTIC_FILL, CANVAS_H, CANVAS_W, PATTERN_KINDS,
                    TEMPLATE_H, TEMPLATE_W, FigureSpec, GarmentSpec, TryOnSample)

__all__ = [
    "AGNOSTIC_FILL", "CANVAS_H", "CANVAS_W", "PATTERN_KINDS", "TEMPLATE_H",
    "TEMPLATE_W", "FigureSpec", "GarmentSpec", "TryOnSample", "Manifest",
    "ManifestEntry", "dataset_digest", "load_sample", "save_sample",
    "render_person", "render_template", "gen_dataset", "gen_sample",
    "sample_figure_spec", "sample_garment_spec", "split_roles",
    "unpaired_garment_map",
]
