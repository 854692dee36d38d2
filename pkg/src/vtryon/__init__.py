"""Two-stage virtual try-on on a synthetic garment corpus.

Stage one estimates a coarse-to-fine appearance flow that warps a flat
garment onto a figure.  Stage two refines the pasted result with a
latent diffusion model conditioned on the warped garment, the clothing
agnostic person and a global garment embedding.  Everything runs on a
small numpy autodiff substrate; no GPU frameworks are involved.
"""

__version__ = "0.1.0"
