import { initApp } from './app.js';

const root = document.getElementById('app');
if (!root) throw new Error('missing #app mount point');
const app = initApp(root, '', window.localStorage.getItem('segqc-reviewer') ?? '');
document.getElementById('app')?.addEventListener('change', (event) => {
  const target = event.target as HTMLInputElement;
  if (target.id === 'reviewer') {
    window.localStorage.setItem('segqc-reviewer', target.value.trim());
  }
});
void app.start();
