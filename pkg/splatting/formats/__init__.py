"""File formats: checkpoints, point files, camera files, images and grid dumps."""
