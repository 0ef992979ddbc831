"""
shmclassnet: response-only model class selection for dynamic systems
"""
