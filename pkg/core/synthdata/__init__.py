from .envmap import EnvMap, Light, rotate_env, random_envmap, sample_env, wrap_degrees
from .subject import Primitive, SubjectSpec, random_subject, intersect
from .shading import diffuse_irradiance, shade_subject, render_background, tone_map
from .generator import generate_dataset, lookup_rotated, angle_to_steps, split_seeds

__all__ = [
    "EnvMap", "Light", "rotate_env", "random_envmap", "sample_env", "wrap_degrees",
    "Primitive", "SubjectSpec", "random_subject", "intersect",
    "diffuse_irradiance", "shade_subject", "render_background", "tone_map",
    "generate_dataset", "lookup_rotated", "angle_to_steps", "split_seeds",
]
