"""Application services behind the rein-seg commands."""
