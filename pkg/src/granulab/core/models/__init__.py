"""All models in granulab."""
