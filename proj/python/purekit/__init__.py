"""Adversarial image purification toolkit.

Thin Python surface over the C++ core: diffusion math, SSIM, one-shot and
iterative purification, FGSM/PGD/Auto-PGD attacks, and accuracy evaluation.
"""

from purekit._core import (  # noqa: F401
    Checkpoint,
    Pipeline,
    PurekitError,
    VarianceSchedule,
    apgd,
    ce_loss,
    classifier_pipeline,
    classify,
    clean_accuracy,
    diffuse_step,
    diffuse_to,
    discriminator_loss,
    dlr_loss,
    eot_gradient,
    fgsm,
    generator_loss,
    linf_dist,
    load_checkpoint,
    make_synthetic,
    pgd,
    posterior_coeffs,
    posterior_sample,
    purified_pipeline,
    purify,
    robust_accuracy,
    save_checkpoint,
    ssim,
    ssim_loss,
    train,
)

__all__ = [name for name in dir() if not name.startswith("_")]
